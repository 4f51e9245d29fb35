// End-to-end round trip against the real service: author a graph through
// the studio model, validate it server-side, export documents, check them
// with the CLI validator, and confirm the service previews are byte-equal
// to a headless compile of the exported documents.

import { spawn, spawnSync } from 'node:child_process'
import type { ChildProcess } from 'node:child_process'
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { StudioClient } from '../src/api.js'
import { AnnotationDocument } from '../src/document.js'
import type { MaskBitmap } from '../src/types.js'
import { STATIC_ROOT } from '../src/types.js'

const PYTHON = process.env.PDGKIT_PYTHON ?? 'python3'
const REPO_ROOT = join(__dirname, '..', '..')

const pythonAvailable = spawnSync(PYTHON, ['-c', 'import pdgkit'], { cwd: REPO_ROOT }).status === 0

const PORT = 8700 + (process.pid % 200)
const BASE = `http://127.0.0.1:${PORT}`

let service: ChildProcess | null = null
let workDir = ''
let sceneDir = ''

function runCli(args: string[]): { status: number; output: string } {
  const result = spawnSync(PYTHON, ['-m', 'pdgkit.cli', ...args], {
    cwd: REPO_ROOT,
    encoding: 'utf-8',
  })
  return { status: result.status ?? -1, output: `${result.stdout}${result.stderr}` }
}

async function waitForHealth(client: StudioClient, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs
  for (;;) {
    try {
      await client.health()
      return
    } catch {
      if (Date.now() > deadline) throw new Error('service did not become healthy')
      await new Promise((resolve) => setTimeout(resolve, 200))
    }
  }
}

describe.skipIf(!pythonAvailable)('studio round trip against the live service', () => {
  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), 'pdg-studio-'))
    sceneDir = join(workDir, 'scene')
    const spec = {
      width: 64,
      height: 48,
      seed: 5,
      background_depth: 5.0,
      camera: { fx: 100.0, fy: 100.0, cx: 31.5, cy: 23.5 },
      parts: [
        {
          id: 'slab',
          rect: [10, 14, 34, 38],
          depth: 2.0,
          motion: {
            parent: STATIC_ROOT,
            kind: 'translation',
            axis: [1, 0, 0],
            center: [0, 0, 0],
            range: [-1, 1],
            target: 0.2,
          },
        },
      ],
    }
    const specPath = join(workDir, 'spec.json')
    writeFileSync(specPath, JSON.stringify(spec))
    const synth = runCli(['synth', specPath, sceneDir])
    expect(synth.status, synth.output).toBe(0)

    service = spawn(PYTHON, ['-m', 'pdgkit.cli', 'serve', '--port', String(PORT)], {
      cwd: REPO_ROOT,
      stdio: 'ignore',
    })
    await waitForHealth(new StudioClient(BASE), 30_000)
  }, 60_000)

  afterAll(() => {
    service?.kill()
  })

  it('authors, validates, exports, and matches a headless compile', async () => {
    const client = new StudioClient(BASE)
    const session = await client.createSession(join(sceneDir, 'scene.json'))
    const scene = await client.getScene(session.session_id)
    expect(scene.parts.map((p) => p.id)).toEqual(['slab'])

    // The service decodes masks for the browser; here the known synthetic
    // rectangle doubles as the decoded bitmap (the square at rows 10..34,
    // cols 14..38 of the 64x48 scene).
    const pixels = new Uint8Array(64 * 48)
    for (let r = 10; r < 34; r++) {
      for (let c = 14; c < 38; c++) pixels[r * 64 + c] = 1
    }
    const masks: MaskBitmap[] = [
      { id: 'slab', maskPath: scene.parts[0].mask_path, width: 64, height: 48, pixels },
    ]

    const doc = new AnnotationDocument()
    const boxed = doc.addPartBox(
      'slab', { top: 9, left: 13, width: 26, height: 26 }, masks, 64, 48,
    )
    expect(boxed.warning).toBeNull()
    expect(boxed.part?.maskPath).toBe('masks/slab.png')
    const edge = doc.addMotionEdge(
      STATIC_ROOT, 'slab', 'translation', [2, 0, 0], [0, 0, 0], [-1, 1],
    )
    expect(edge.error).toBeNull()

    const diagnostics = await client.putPdg(session.session_id, doc.toPdgDocument())
    expect(diagnostics).toEqual([])

    // UI clamp must equal the service clamp exactly
    const localClamp = doc.setSlider('slab', 7)
    const poseResponse = await client.putPose(session.session_id, doc.toPoseDocument().params, 3)
    expect(poseResponse.pose.slab).toBe(localClamp)
    doc.setSlider('slab', 0.2)
    const settled = await client.putPose(session.session_id, doc.toPoseDocument().params, 3)
    expect(settled.pose.slab).toBe(0.2)

    const previews = []
    for (let frame = 0; frame <= 3; frame++) {
      previews.push(await client.getPreview(session.session_id, frame))
    }

    // Export the documents the user would download.
    const pdgPath = join(sceneDir, 'studio_pdg.json')
    const posePath = join(sceneDir, 'studio_pose.json')
    writeFileSync(pdgPath, JSON.stringify(doc.toPdgDocument(), null, 2) + '\n')
    writeFileSync(posePath, JSON.stringify(doc.toPoseDocument(), null, 2) + '\n')

    const validate = runCli(['validate', pdgPath])
    expect(validate.status, validate.output).toBe(0)

    const compileDir = join(workDir, 'headless')
    const compile = runCli([
      'compile', join(sceneDir, 'scene.json'), pdgPath, posePath,
      '--frames', '3', '-o', compileDir,
    ])
    expect(compile.status, compile.output).toBe(0)

    for (let frame = 0; frame <= 3; frame++) {
      const track = readFileSync(join(compileDir, `track_000${frame}.png`))
      const mask = readFileSync(join(compileDir, `mask_000${frame}.png`))
      expect(Buffer.from(previews[frame].tracking_png, 'base64').equals(track)).toBe(true)
      expect(Buffer.from(previews[frame].mask_png, 'base64').equals(mask)).toBe(true)
    }

    // Service-side compile from the same session matches the headless tree.
    const svcDir = join(workDir, 'service_compile')
    await client.compile(session.session_id, svcDir)
    const headlessManifest = readFileSync(join(compileDir, 'compile_manifest.json'), 'utf-8')
    const serviceManifest = readFileSync(join(svcDir, 'compile_manifest.json'), 'utf-8')
    expect(serviceManifest).toBe(headlessManifest)
  }, 120_000)
})
