/** Skeleton rendering. Drawing is expressed as primitive commands so the
 * logic (scaling, marker/edge/highlight placement) is testable without a
 * canvas; a thin adapter replays the commands onto a 2D context. */
import { DisplayPayload } from "./api.js";

export type DrawCommand =
  | { kind: "edge"; from: [number, number]; to: [number, number] }
  | { kind: "marker"; at: [number, number]; joint: number; emphasized: boolean }
  | { kind: "label"; at: [number, number]; text: string };

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

/** Map raw pixel keypoints into the viewport, preserving aspect ratio. */
export function fitToViewport(
  pose2d: [number, number][],
  viewport: Viewport,
): [number, number][] {
  if (pose2d.length === 0) return [];
  const xs = pose2d.map((p) => p[0]);
  const ys = pose2d.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const usableW = viewport.width - 2 * viewport.padding;
  const usableH = viewport.height - 2 * viewport.padding;
  const scale = Math.min(usableW / spanX, usableH / spanY);
  const offX = viewport.padding + (usableW - spanX * scale) / 2;
  const offY = viewport.padding + (usableH - spanY * scale) / 2;
  return pose2d.map(([x, y]) => [offX + (x - minX) * scale, offY + (y - minY) * scale]);
}

/** Build the command list for one skeleton: every edge, every joint marker,
 * and the queried pair both emphasized and labelled. Throws on malformed
 * payloads so the caller can surface a visible error state. */
export function skeletonCommands(display: DisplayPayload, viewport: Viewport): DrawCommand[] {
  const n = display.pose2d.length;
  if (n === 0) throw new Error("malformed display payload: empty pose");
  for (const p of display.pose2d) {
    if (!Array.isArray(p) || p.length !== 2 || !p.every(Number.isFinite)) {
      throw new Error("malformed display payload: keypoint is not a finite [x, y]");
    }
  }
  for (const [a, b] of display.edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw new Error(`malformed display payload: edge (${a}, ${b}) outside pose`);
    }
  }
  for (const h of display.highlight) {
    if (h < 0 || h >= n) {
      throw new Error(`malformed display payload: highlight ${h} outside pose`);
    }
  }
  const points = fitToViewport(display.pose2d, viewport);
  const emphasized = new Set(display.highlight);
  const commands: DrawCommand[] = [];
  for (const [a, b] of display.edges) {
    commands.push({ kind: "edge", from: points[a]!, to: points[b]! });
  }
  points.forEach((at, joint) => {
    commands.push({ kind: "marker", at, joint, emphasized: emphasized.has(joint) });
  });
  for (const h of display.highlight) {
    const name = display.joint_names[h] ?? `joint ${h}`;
    commands.push({ kind: "label", at: points[h]!, text: name });
  }
  return commands;
}

/** Completion view: joints listed closest-to-farthest, ties grouped. */
export function orderingLines(ordering: number[][], jointNames: string[]): string[] {
  return ordering.map((cls, rank) => {
    const names = cls.map((j) => jointNames[j] ?? `joint ${j}`).join(" = ");
    return `${rank + 1}. ${names}`;
  });
}

/** Replay commands onto a canvas 2D context. */
export function paint(ctx: CanvasRenderingContext2D, commands: DrawCommand[]): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const cmd of commands) {
    if (cmd.kind === "edge") {
      ctx.strokeStyle = "#8899aa";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(cmd.from[0], cmd.from[1]);
      ctx.lineTo(cmd.to[0], cmd.to[1]);
      ctx.stroke();
    } else if (cmd.kind === "marker") {
      ctx.fillStyle = cmd.emphasized ? "#e4572e" : "#2e86ab";
      ctx.beginPath();
      ctx.arc(cmd.at[0], cmd.at[1], cmd.emphasized ? 9 : 5, 0, 2 * Math.PI);
      ctx.fill();
      if (cmd.emphasized) {
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.stroke();
      }
    } else {
      ctx.fillStyle = "#222222";
      ctx.font = "13px sans-serif";
      ctx.fillText(cmd.text, cmd.at[0] + 12, cmd.at[1] - 8);
    }
  }
}
