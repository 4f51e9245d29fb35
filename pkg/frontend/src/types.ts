// Wire formats shared with the service. Field names are fixed by the PDG
// document format; the UI never invents shapes of its own.

export type Vec3 = [number, number, number]

export type MotionKind = 'translation' | 'rotation'

export const STATIC_ROOT = '__static__'

export interface NodeEntry {
  id: string
  movable: boolean
  footprint_path: string
  points_path?: string
}

export interface EdgeEntry {
  parent: string
  child: string
  kind: MotionKind
  axis: Vec3
  center: Vec3
  range: [number, number]
}

export interface PdgDocument {
  version: 1
  nodes: NodeEntry[]
  edges: EdgeEntry[]
}

export interface PoseDocument {
  version: 1
  params: Record<string, number>
}

export interface Box {
  top: number
  left: number
  width: number
  height: number
}

export interface ScenePart {
  id: string
  mask_path: string | null
  mask_png: string
}

export interface SceneResponse {
  width: number
  height: number
  image_png: string
  camera: Record<string, unknown>
  parts: ScenePart[]
}

export interface SessionResponse {
  session_id: string
  width: number
  height: number
  parts: string[]
}

export interface PoseResponse {
  pose: Record<string, number>
  frames: number
  easing: string
  previews: { tracking: string; frame_template: string }
}

export interface PreviewResponse {
  frame: number
  tracking_png: string
  mask_png: string
}

export interface CompileResponse {
  manifest_path: string
  manifest: Record<string, unknown>
}

export interface Diagnostics {
  diagnostics: string[]
}

// Raster mask used for box matching; decoded from the service's PNG.
export interface MaskBitmap {
  id: string
  maskPath: string | null
  width: number
  height: number
  pixels: Uint8Array // row-major, nonzero = set
}
