// Studio shell: session loading, part boxes, motion edges, pose sliders,
// live previews, and artifact export. All validation and rendering come
// from the service; the UI reconciles to whatever the server returns.

import { StudioClient } from './api.js'
import { decodeMaskPng, drawAxisArrow, drawBox, drawCenterHandle } from './canvas.js'
import { AnnotationDocument } from './document.js'
import type { Box, MaskBitmap, MotionKind, SceneResponse, Vec3 } from './types.js'
import { STATIC_ROOT } from './types.js'

interface StudioState {
  client: StudioClient
  sessionId: string
  scene: SceneResponse
  masks: MaskBitmap[]
  doc: AnnotationDocument
  frames: number
  previewFrame: number
  validated: boolean
  diagnostics: string[]
  poseSeq: number
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

function pngUrl(base64: string): string {
  return `data:image/png;base64,${base64}`
}

async function loadImage(base64: string): Promise<HTMLImageElement> {
  const image = new Image()
  image.src = pngUrl(base64)
  await image.decode()
  return image
}

let state: StudioState | null = null
let sceneImage: HTMLImageElement | null = null
let dragStart: [number, number] | null = null
let dragBox: Box | null = null

function status(message: string, kind: 'ok' | 'warn' | 'error' = 'ok'): void {
  const badge = el<HTMLSpanElement>('status')
  badge.textContent = message
  badge.className = `badge ${kind}`
}

function redraw(): void {
  if (!state || !sceneImage) return
  const canvas = el<HTMLCanvasElement>('scene-canvas')
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  ctx.clearRect(0, 0, canvas.width, canvas.height)
  ctx.drawImage(sceneImage, 0, 0)
  for (const part of state.doc.parts) {
    drawBox(ctx, part.box, part.maskId ? '#3fb950' : '#f85149')
    ctx.fillStyle = '#e6edf3'
    ctx.fillText(part.id, part.box.left + 3, part.box.top + 12)
  }
  for (const edge of state.doc.edges) {
    const child = state.doc.parts.find((p) => p.id === edge.child)
    if (!child) continue
    const origin: [number, number] = [
      child.box.left + child.box.width / 2,
      child.box.top + child.box.height / 2,
    ]
    drawAxisArrow(ctx, origin, edge.axis, 40, edge.kind === 'rotation' ? '#d29922' : '#58a6ff')
    if (edge.kind === 'rotation') drawCenterHandle(ctx, origin, '#d29922')
  }
  if (dragBox) drawBox(ctx, dragBox, '#58a6ff')
}

function refreshPartLists(): void {
  if (!state) return
  const partList = el<HTMLUListElement>('part-list')
  partList.innerHTML = ''
  for (const part of state.doc.parts) {
    const item = document.createElement('li')
    item.textContent = `${part.id}  ${part.maskId ? `mask: ${part.maskId}` : 'NO MASK'}`
    partList.appendChild(item)
  }
  const options = [STATIC_ROOT, ...state.doc.parts.map((p) => p.id)]
  for (const selectId of ['edge-parent', 'edge-child']) {
    const select = el<HTMLSelectElement>(selectId)
    select.innerHTML = ''
    for (const id of options) {
      if (selectId === 'edge-child' && id === STATIC_ROOT) continue
      const option = document.createElement('option')
      option.value = id
      option.textContent = id
      select.appendChild(option)
    }
  }
}

function refreshSliders(): void {
  if (!state) return
  const holder = el<HTMLDivElement>('sliders')
  holder.innerHTML = ''
  for (const edge of state.doc.edges) {
    const row = document.createElement('div')
    row.className = 'slider-row'
    const label = document.createElement('label')
    const value = state.doc.sliders[edge.child] ?? 0
    label.textContent = `${edge.child} (${edge.kind}) = ${value.toFixed(3)}`
    const slider = document.createElement('input')
    slider.type = 'range'
    slider.min = String(edge.range[0])
    slider.max = String(edge.range[1])
    slider.step = '0.001'
    slider.value = String(value)
    slider.addEventListener('input', () => {
      const clamped = state!.doc.setSlider(edge.child, Number(slider.value))
      label.textContent = `${edge.child} (${edge.kind}) = ${clamped.toFixed(3)}`
      void pushPose()
    })
    row.append(label, slider)
    holder.appendChild(row)
  }
}

async function pushPose(): Promise<void> {
  if (!state || !state.validated) return
  const seq = ++state.poseSeq
  try {
    const response = await state.client.putPose(
      state.sessionId, state.doc.toPoseDocument().params, state.frames,
    )
    if (seq !== state.poseSeq) return // a newer slider update superseded this one
    for (const [child, value] of Object.entries(response.pose)) {
      state.doc.sliders[child] = value // reconcile to the authoritative clamp
    }
    await refreshPreview()
  } catch (error) {
    status(`pose update failed: ${(error as Error).message}`, 'error')
  }
}

async function refreshPreview(): Promise<void> {
  if (!state || !state.validated) return
  const frame = state.previewFrame
  try {
    const preview = await state.client.getPreview(state.sessionId, frame)
    el<HTMLImageElement>('preview-track').src = pngUrl(preview.tracking_png)
    const maskImg = el<HTMLImageElement>('preview-mask')
    maskImg.src = pngUrl(preview.mask_png)
    maskImg.style.display = el<HTMLInputElement>('mask-toggle').checked ? 'block' : 'none'
    status(`preview frame ${frame}/${state.frames}`)
  } catch (error) {
    status(`preview failed: ${(error as Error).message}`, 'error')
  }
}

async function revalidate(): Promise<void> {
  if (!state) return
  const diagnostics = await state.client.putPdg(state.sessionId, state.doc.toPdgDocument())
  state.diagnostics = diagnostics
  state.validated = diagnostics.length === 0
  const list = el<HTMLUListElement>('diagnostics')
  list.innerHTML = ''
  for (const line of diagnostics) {
    const item = document.createElement('li')
    item.textContent = line
    list.appendChild(item)
  }
  const blockers = state.doc.exportBlockers()
  const exportable = state.validated && blockers.length === 0
  el<HTMLButtonElement>('export-pdg').disabled = !exportable
  el<HTMLButtonElement>('export-pose').disabled = !exportable
  el<HTMLButtonElement>('compile').disabled = !exportable
  if (state.validated) {
    status(blockers.length ? blockers[0] : 'graph valid', blockers.length ? 'warn' : 'ok')
    if (exportable) await pushPose()
  } else {
    status(`${diagnostics.length} diagnostic(s)`, 'error')
  }
}

function download(filename: string, payload: unknown): void {
  const blob = new Blob([JSON.stringify(payload, null, 2) + '\n'], { type: 'application/json' })
  const link = document.createElement('a')
  link.href = URL.createObjectURL(blob)
  link.download = filename
  link.click()
  URL.revokeObjectURL(link.href)
}

async function connect(): Promise<void> {
  const base = el<HTMLInputElement>('service-url').value.replace(/\/$/, '')
  const manifest = el<HTMLInputElement>('manifest-path').value
  const client = new StudioClient(base)
  const session = await client.createSession(manifest)
  const scene = await client.getScene(session.session_id)
  const masks: MaskBitmap[] = []
  for (const part of scene.parts) {
    const decoded = await decodeMaskPng(part.mask_png)
    masks.push({ id: part.id, maskPath: part.mask_path, ...decoded })
  }
  state = {
    client,
    sessionId: session.session_id,
    scene,
    masks,
    doc: new AnnotationDocument(),
    frames: Number(el<HTMLInputElement>('frames').value) || 48,
    previewFrame: 0,
    validated: false,
    diagnostics: [],
    poseSeq: 0,
  }
  const canvas = el<HTMLCanvasElement>('scene-canvas')
  canvas.width = scene.width
  canvas.height = scene.height
  sceneImage = await loadImage(scene.image_png)
  el<HTMLInputElement>('preview-frame').max = String(state.frames)
  refreshPartLists()
  refreshSliders()
  redraw()
  status(`session ${session.session_id.slice(0, 8)} loaded (${scene.parts.length} masks)`)
}

function canvasPoint(event: MouseEvent): [number, number] {
  const canvas = el<HTMLCanvasElement>('scene-canvas')
  const rect = canvas.getBoundingClientRect()
  return [
    ((event.clientX - rect.left) / rect.width) * canvas.width,
    ((event.clientY - rect.top) / rect.height) * canvas.height,
  ]
}

export function wireUp(): void {
  el<HTMLButtonElement>('connect').addEventListener('click', () => {
    void connect().catch((error) => status(`connect failed: ${error.message}`, 'error'))
  })

  const canvas = el<HTMLCanvasElement>('scene-canvas')
  canvas.addEventListener('mousedown', (event) => {
    dragStart = canvasPoint(event)
  })
  canvas.addEventListener('mousemove', (event) => {
    if (!dragStart) return
    const [x, y] = canvasPoint(event)
    dragBox = {
      left: Math.min(dragStart[0], x),
      top: Math.min(dragStart[1], y),
      width: Math.abs(x - dragStart[0]),
      height: Math.abs(y - dragStart[1]),
    }
    redraw()
  })
  canvas.addEventListener('mouseup', () => {
    if (!state || !dragBox) {
      dragStart = null
      return
    }
    const id = el<HTMLInputElement>('part-id').value.trim() || `part${state.doc.parts.length}`
    const { part, warning } = state.doc.addPartBox(
      id, dragBox, state.masks, state.scene.width, state.scene.height,
    )
    if (warning) status(warning, part ? 'warn' : 'error')
    dragStart = null
    dragBox = null
    refreshPartLists()
    redraw()
    void revalidate()
  })

  el<HTMLButtonElement>('add-edge').addEventListener('click', () => {
    if (!state) return
    const axis = ['axis-x', 'axis-y', 'axis-z'].map(
      (id) => Number(el<HTMLInputElement>(id).value) || 0,
    ) as Vec3
    const center = ['center-x', 'center-y', 'center-z'].map(
      (id) => Number(el<HTMLInputElement>(id).value) || 0,
    ) as Vec3
    const result = state.doc.addMotionEdge(
      el<HTMLSelectElement>('edge-parent').value,
      el<HTMLSelectElement>('edge-child').value,
      el<HTMLSelectElement>('edge-kind').value as MotionKind,
      axis,
      center,
      [Number(el<HTMLInputElement>('range-lo').value) || 0,
       Number(el<HTMLInputElement>('range-hi').value) || 0],
    )
    if (result.error) {
      status(result.error, 'error')
      return
    }
    refreshSliders()
    redraw()
    void revalidate()
  })

  el<HTMLInputElement>('preview-frame').addEventListener('input', (event) => {
    if (!state) return
    state.previewFrame = Number((event.target as HTMLInputElement).value)
    void refreshPreview()
  })
  el<HTMLInputElement>('mask-toggle').addEventListener('change', () => void refreshPreview())

  el<HTMLButtonElement>('export-pdg').addEventListener('click', () => {
    if (state) download('pdg.json', state.doc.toPdgDocument())
  })
  el<HTMLButtonElement>('export-pose').addEventListener('click', () => {
    if (state) download('pose.json', state.doc.toPoseDocument())
  })
  el<HTMLButtonElement>('compile').addEventListener('click', () => {
    if (!state) return
    const outDir = window.prompt('output directory on the service host', 'compiled')
    if (!outDir) return
    state.client
      .compile(state.sessionId, outDir)
      .then((response) => status(`compiled: ${response.manifest_path}`))
      .catch((error) => status(`compile failed: ${error.message}`, 'error'))
  })
}

if (typeof document !== 'undefined' && document.getElementById('scene-canvas')) {
  wireUp()
}
