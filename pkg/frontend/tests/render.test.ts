import { describe, expect, it } from "vitest";

import { DisplayPayload } from "../src/api.js";
import { fitToViewport, orderingLines, skeletonCommands } from "../src/render.js";

const VIEWPORT = { width: 480, height: 480, padding: 30 };

function chainDisplay(n: number, highlight: number[] = []): DisplayPayload {
  return {
    pose2d: Array.from({ length: n }, (_, k) => [100 + 10 * k, 200 + 5 * k] as [number, number]),
    edges: Array.from({ length: n - 1 }, (_, k) => [k, k + 1] as [number, number]),
    joint_names: Array.from({ length: n }, (_, k) => `j${k}`),
    highlight,
  };
}

describe("skeletonCommands", () => {
  it("draws 14 markers and 13 edges for a 14-joint item", () => {
    const commands = skeletonCommands(chainDisplay(14, [3, 9]), VIEWPORT);
    expect(commands.filter((c) => c.kind === "marker")).toHaveLength(14);
    expect(commands.filter((c) => c.kind === "edge")).toHaveLength(13);
  });

  it("emphasizes exactly the queried pair and labels it", () => {
    const commands = skeletonCommands(chainDisplay(14, [3, 9]), VIEWPORT);
    const emphasized = commands.filter((c) => c.kind === "marker" && c.emphasized);
    expect(emphasized.map((c) => (c.kind === "marker" ? c.joint : -1)).sort()).toEqual([3, 9]);
    const labels = commands.filter((c) => c.kind === "label");
    expect(labels.map((c) => (c.kind === "label" ? c.text : ""))).toEqual(["j3", "j9"]);
  });

  it("rejects malformed payloads instead of failing silently", () => {
    const bad = chainDisplay(5);
    bad.edges.push([0, 99]);
    expect(() => skeletonCommands(bad, VIEWPORT)).toThrow(/edge/);
    expect(() => skeletonCommands(chainDisplay(5, [7]), VIEWPORT)).toThrow(/highlight/);
    const nan = chainDisplay(3);
    nan.pose2d[1] = [Number.NaN, 0];
    expect(() => skeletonCommands(nan, VIEWPORT)).toThrow(/finite/);
    expect(() => skeletonCommands(chainDisplay(0), VIEWPORT)).toThrow(/empty/);
  });
});

describe("fitToViewport", () => {
  it("keeps every point inside the padded area", () => {
    const raw = Array.from({ length: 20 }, (_, k) => [50 * k, 1000 - 30 * k] as [number, number]);
    for (const [x, y] of fitToViewport(raw, VIEWPORT)) {
      expect(x).toBeGreaterThanOrEqual(VIEWPORT.padding - 1e-9);
      expect(x).toBeLessThanOrEqual(VIEWPORT.width - VIEWPORT.padding + 1e-9);
      expect(y).toBeGreaterThanOrEqual(VIEWPORT.padding - 1e-9);
      expect(y).toBeLessThanOrEqual(VIEWPORT.height - VIEWPORT.padding + 1e-9);
    }
  });

  it("preserves aspect ratio", () => {
    const raw: [number, number][] = [
      [0, 0],
      [100, 0],
      [0, 50],
    ];
    const fitted = fitToViewport(raw, VIEWPORT);
    const dx = fitted[1]![0] - fitted[0]![0];
    const dy = fitted[2]![1] - fitted[0]![1];
    expect(dx / dy).toBeCloseTo(2.0, 9);
  });
});

describe("orderingLines", () => {
  it("lists closest first and groups ties with equals signs", () => {
    const lines = orderingLines([[2], [0, 3], [1]], ["hip", "head", "neck", "wrist"]);
    expect(lines).toEqual(["1. neck", "2. hip = wrist", "3. head"]);
  });

  it("falls back to joint indices without names", () => {
    expect(orderingLines([[1], [0]], [])).toEqual(["1. joint 1", "2. joint 0"]);
  });
});
