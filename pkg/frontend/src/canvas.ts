// Display-only canvas helpers: boxes, mask overlays, axis gizmos. No
// geometry math beyond drawing transforms; kinematics stay on the server.

import type { Box, Vec3 } from './types.js'

export function drawBox(ctx: CanvasRenderingContext2D, box: Box, color: string): void {
  ctx.save()
  ctx.strokeStyle = color
  ctx.lineWidth = 2
  ctx.setLineDash([6, 3])
  ctx.strokeRect(box.left, box.top, box.width, box.height)
  ctx.restore()
}

export function drawMaskOverlay(ctx: CanvasRenderingContext2D, mask: ImageBitmap | HTMLImageElement,
                                alpha: number, tint: string): void {
  ctx.save()
  ctx.globalAlpha = alpha
  ctx.drawImage(mask, 0, 0)
  ctx.globalCompositeOperation = 'source-atop'
  ctx.fillStyle = tint
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height)
  ctx.restore()
}

/** Arrow for a motion axis, projected as a screen-space direction hint. */
export function drawAxisArrow(ctx: CanvasRenderingContext2D, originPx: [number, number],
                              axis: Vec3, lengthPx: number, color: string): void {
  // x -> right, y -> down (image convention); z collapses toward the viewer
  // and only shortens the arrow. This is a display hint, not a projection.
  const dx = axis[0]
  const dy = axis[1]
  const planar = Math.hypot(dx, dy)
  const scale = planar === 0 ? 0 : lengthPx * planar
  const ux = planar === 0 ? 0 : dx / planar
  const uy = planar === 0 ? 0 : dy / planar
  const [x0, y0] = originPx
  const x1 = x0 + ux * scale
  const y1 = y0 + uy * scale
  ctx.save()
  ctx.strokeStyle = color
  ctx.fillStyle = color
  ctx.lineWidth = 2
  ctx.beginPath()
  ctx.moveTo(x0, y0)
  ctx.lineTo(x1, y1)
  ctx.stroke()
  if (scale > 0) {
    const head = 6
    ctx.beginPath()
    ctx.moveTo(x1, y1)
    ctx.lineTo(x1 - head * (ux + uy * 0.5), y1 - head * (uy - ux * 0.5))
    ctx.lineTo(x1 - head * (ux - uy * 0.5), y1 - head * (uy + ux * 0.5))
    ctx.closePath()
    ctx.fill()
  } else {
    ctx.beginPath()
    ctx.arc(x0, y0, 4, 0, 2 * Math.PI)
    ctx.fill()
  }
  ctx.restore()
}

export function drawCenterHandle(ctx: CanvasRenderingContext2D, centerPx: [number, number],
                                 color: string): void {
  ctx.save()
  ctx.strokeStyle = color
  ctx.lineWidth = 2
  ctx.beginPath()
  ctx.arc(centerPx[0], centerPx[1], 5, 0, 2 * Math.PI)
  ctx.stroke()
  ctx.beginPath()
  ctx.moveTo(centerPx[0] - 8, centerPx[1])
  ctx.lineTo(centerPx[0] + 8, centerPx[1])
  ctx.moveTo(centerPx[0], centerPx[1] - 8)
  ctx.lineTo(centerPx[0], centerPx[1] + 8)
  ctx.stroke()
  ctx.restore()
}

export async function decodeMaskPng(base64Png: string): Promise<{
  width: number
  height: number
  pixels: Uint8Array
}> {
  const binary = atob(base64Png)
  const bytes = new Uint8Array(binary.length)
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i)
  const bitmap = await createImageBitmap(new Blob([bytes], { type: 'image/png' }))
  const canvas = document.createElement('canvas')
  canvas.width = bitmap.width
  canvas.height = bitmap.height
  const ctx = canvas.getContext('2d')
  if (!ctx) throw new Error('2d context unavailable')
  ctx.drawImage(bitmap, 0, 0)
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data
  const pixels = new Uint8Array(bitmap.width * bitmap.height)
  for (let i = 0; i < pixels.length; i++) pixels[i] = data[i * 4] >= 128 ? 1 : 0
  return { width: bitmap.width, height: bitmap.height, pixels }
}
