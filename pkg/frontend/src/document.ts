// Annotation document: the studio-side model of parts, motion edges, and
// pose sliders. It serializes to exactly the service's PDG document format
// and mirrors the service's clamping rule, so what the user sees is what
// the validator and compiler receive.

import type {
  Box,
  EdgeEntry,
  MaskBitmap,
  MotionKind,
  PdgDocument,
  PoseDocument,
  Vec3,
} from './types.js'
import { STATIC_ROOT } from './types.js'

export interface PartEntry {
  id: string
  box: Box
  maskId: string | null
  maskPath: string | null
  movable: boolean
}

export interface MatchResult {
  maskId: string | null
  maskPath: string | null
  coverage: number
  warning: string | null
}

export interface EdgeResult {
  edge: EdgeEntry | null
  error: string | null
}

const MATCH_THRESHOLD = 0.5

export function boxInsideImage(box: Box, width: number, height: number): boolean {
  return (
    box.width > 0 &&
    box.height > 0 &&
    box.left >= 0 &&
    box.top >= 0 &&
    box.left + box.width <= width &&
    box.top + box.height <= height
  )
}

/** Fraction of each mask's set pixels inside the box; best one wins. */
export function matchBoxToMask(box: Box, masks: MaskBitmap[], claimed: Set<string>): MatchResult {
  let bestId: string | null = null
  let bestPath: string | null = null
  let bestCoverage = 0
  for (const mask of masks) {
    let inside = 0
    let total = 0
    const r0 = Math.max(0, Math.floor(box.top))
    const r1 = Math.min(mask.height, Math.ceil(box.top + box.height))
    const c0 = Math.max(0, Math.floor(box.left))
    const c1 = Math.min(mask.width, Math.ceil(box.left + box.width))
    for (let r = 0; r < mask.height; r++) {
      for (let c = 0; c < mask.width; c++) {
        if (mask.pixels[r * mask.width + c]) {
          total++
          if (r >= r0 && r < r1 && c >= c0 && c < c1) inside++
        }
      }
    }
    const coverage = total === 0 ? 0 : inside / total
    if (coverage > bestCoverage) {
      bestCoverage = coverage
      bestId = mask.id
      bestPath = mask.maskPath
    }
  }
  if (bestId === null || bestCoverage < MATCH_THRESHOLD) {
    return { maskId: null, maskPath: null, coverage: bestCoverage, warning: 'no mask' }
  }
  const warning = claimed.has(bestId) ? `mask ${bestId} already claimed by another part` : null
  return { maskId: bestId, maskPath: bestPath, coverage: bestCoverage, warning }
}

export function normalizeAxis(axis: Vec3): Vec3 | null {
  const norm = Math.hypot(axis[0], axis[1], axis[2])
  if (norm === 0 || !Number.isFinite(norm)) return null
  return [axis[0] / norm, axis[1] / norm, axis[2] / norm]
}

export function clampToRange(value: number, range: [number, number]): number {
  return Math.min(Math.max(value, range[0]), range[1])
}

export class AnnotationDocument {
  parts: PartEntry[] = []
  edges: EdgeEntry[] = []
  sliders: Record<string, number> = {}

  addPartBox(id: string, box: Box, masks: MaskBitmap[], imageWidth: number,
             imageHeight: number): { part: PartEntry | null; warning: string | null } {
    if (!boxInsideImage(box, imageWidth, imageHeight)) {
      return { part: null, warning: 'box outside image' }
    }
    if (this.parts.some((p) => p.id === id)) {
      return { part: null, warning: `part id ${id} already exists` }
    }
    const claimed = new Set(
      this.parts.filter((p) => p.maskId !== null).map((p) => p.maskId as string),
    )
    const match = matchBoxToMask(box, masks, claimed)
    const part: PartEntry = {
      id,
      box,
      maskId: match.maskId,
      maskPath: match.maskPath,
      movable: true,
    }
    this.parts.push(part)
    return { part, warning: match.warning }
  }

  private wouldCycle(parent: string, child: string): boolean {
    // Parent chain walk is enough: every child has at most one incoming edge.
    const parentOf = new Map(this.edges.map((e) => [e.child, e.parent]))
    let cursor: string | undefined = parent
    while (cursor !== undefined && cursor !== STATIC_ROOT) {
      if (cursor === child) return true
      cursor = parentOf.get(cursor)
    }
    return false
  }

  addMotionEdge(parent: string, child: string, kind: MotionKind, axis: Vec3,
                center: Vec3, range: [number, number]): EdgeResult {
    if (parent === child) {
      return { edge: null, error: 'a part cannot be its own parent' }
    }
    const ids = new Set(this.parts.map((p) => p.id))
    if (!ids.has(child) || (parent !== STATIC_ROOT && !ids.has(parent))) {
      return { edge: null, error: 'edge endpoints must be existing parts' }
    }
    if (this.edges.some((e) => e.child === child)) {
      return { edge: null, error: `${child} already has a parent edge` }
    }
    if (this.wouldCycle(parent, child)) {
      return { edge: null, error: `edge ${parent} -> ${child} would close a cycle` }
    }
    const unit = normalizeAxis(axis)
    if (unit === null) {
      return { edge: null, error: 'axis must have nonzero length' }
    }
    const [lo, hi] = range
    if (!(lo <= 0 && 0 <= hi)) {
      return { edge: null, error: 'range must contain the rest value 0' }
    }
    const edge: EdgeEntry = { parent, child, kind, axis: unit, center, range: [lo, hi] }
    this.edges.push(edge)
    this.sliders[child] = 0
    return { edge, error: null }
  }

  removeEdge(child: string): void {
    this.edges = this.edges.filter((e) => e.child !== child)
    delete this.sliders[child]
  }

  /** Slider values are clamped with the same rule the service applies. */
  setSlider(child: string, value: number): number {
    const edge = this.edges.find((e) => e.child === child)
    if (!edge) throw new Error(`no motion edge for ${child}`)
    const clamped = clampToRange(value, edge.range)
    this.sliders[child] = clamped
    return clamped
  }

  exportBlockers(): string[] {
    const blockers: string[] = []
    for (const part of this.parts) {
      if (part.maskPath === null) blockers.push(`part ${part.id} has no matched mask`)
    }
    if (this.parts.length === 0) blockers.push('no parts drawn')
    return blockers
  }

  toPdgDocument(): PdgDocument {
    return {
      version: 1,
      nodes: this.parts.map((p) => ({
        id: p.id,
        movable: p.movable,
        footprint_path: p.maskPath ?? '',
      })),
      edges: this.edges.map((e) => ({
        parent: e.parent,
        child: e.child,
        kind: e.kind,
        axis: [...e.axis] as Vec3,
        center: [...e.center] as Vec3,
        range: [...e.range] as [number, number],
      })),
    }
  }

  toPoseDocument(): PoseDocument {
    return { version: 1, params: { ...this.sliders } }
  }

  static fromPdgDocument(doc: PdgDocument): AnnotationDocument {
    const out = new AnnotationDocument()
    out.parts = doc.nodes.map((n) => ({
      id: n.id,
      box: { top: 0, left: 0, width: 0, height: 0 },
      maskId: n.id,
      maskPath: n.footprint_path,
      movable: n.movable,
    }))
    out.edges = doc.edges.map((e) => ({ ...e }))
    for (const e of doc.edges) out.sliders[e.child] = 0
    return out
  }
}
