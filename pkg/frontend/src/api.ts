// Thin typed client for the studio service. All geometry and validation
// live on the server; this layer only moves JSON.

import type {
  CompileResponse,
  Diagnostics,
  PdgDocument,
  PoseResponse,
  PreviewResponse,
  SceneResponse,
  SessionResponse,
} from './types.js'

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message)
  }
}

export interface PdgRejection {
  diagnostics: string[]
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms))

export class StudioClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    if (!response.ok) {
      const text = await response.text()
      throw new ServiceError(response.status, text || response.statusText)
    }
    return (await response.json()) as T
  }

  health(): Promise<{ status: string }> {
    return this.request('GET', '/health')
  }

  createSession(manifestPath: string): Promise<SessionResponse> {
    return this.request('POST', '/session', { manifest_path: manifestPath })
  }

  getScene(sessionId: string): Promise<SceneResponse> {
    return this.request('GET', `/session/${sessionId}/scene`)
  }

  /** Resolves with [] on success, or the diagnostics array on a 400. */
  async putPdg(sessionId: string, document: PdgDocument): Promise<string[]> {
    const response = await this.fetchImpl(`${this.baseUrl}/session/${sessionId}/pdg`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(document),
    })
    const body = (await response.json()) as Diagnostics & { error?: string }
    if (response.ok) return []
    if (response.status === 400 && Array.isArray(body.diagnostics)) {
      return body.diagnostics
    }
    throw new ServiceError(response.status, body.error ?? 'pdg update failed')
  }

  /**
   * Update the target pose. A 409 (another writer holds the session) retries
   * with the latest values: last writer wins.
   */
  async putPose(sessionId: string, params: Record<string, number>, frames?: number,
                easing?: string, retries = 5): Promise<PoseResponse> {
    for (let attempt = 0; ; attempt++) {
      const response = await this.fetchImpl(`${this.baseUrl}/session/${sessionId}/pose`, {
        method: 'PUT',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ params, frames, easing }),
      })
      if (response.status === 409 && attempt < retries) {
        await sleep(25 * (attempt + 1))
        continue
      }
      if (!response.ok) {
        throw new ServiceError(response.status, await response.text())
      }
      return (await response.json()) as PoseResponse
    }
  }

  getPreview(sessionId: string, frame: number): Promise<PreviewResponse> {
    return this.request('GET', `/session/${sessionId}/preview/${frame}`)
  }

  compile(sessionId: string, outDir: string): Promise<CompileResponse> {
    return this.request('POST', `/session/${sessionId}/compile`, { out_dir: outDir })
  }
}
