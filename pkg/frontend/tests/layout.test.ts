import { describe, expect, it } from "vitest";

import { layeredLayout } from "../src/layout.js";

const byId = (placed: ReturnType<typeof layeredLayout>) =>
  new Map(placed.map((p) => [p.id, p]));

describe("layeredLayout", () => {
  it("places a diamond in three layers with the shared ancestor once", () => {
    const placed = layeredLayout(
      [1, 2, 3, 4],
      [
        [1, 2],
        [1, 3],
        [2, 4],
        [3, 4],
      ],
    );
    expect(placed).toHaveLength(4);
    expect(placed.filter((p) => p.id === 1)).toHaveLength(1);
    const pos = byId(placed);
    expect(pos.get(1)?.layer).toBe(0);
    expect(pos.get(2)?.layer).toBe(1);
    expect(pos.get(3)?.layer).toBe(1);
    expect(pos.get(4)?.layer).toBe(2);
    expect(new Set([pos.get(2)?.row, pos.get(3)?.row])).toEqual(new Set([0, 1]));
  });

  it("keeps every dependency strictly left of its dependent", () => {
    const ids = [1, 2, 3, 4, 5, 6, 7, 8];
    const edges: [number, number][] = [
      [1, 3],
      [2, 3],
      [1, 4],
      [3, 5],
      [4, 5],
      [2, 6],
      [5, 7],
      [6, 7],
      [7, 8],
      [1, 8],
    ];
    const pos = byId(layeredLayout(ids, edges));
    for (const [producer, consumer] of edges) {
      expect(pos.get(producer)!.layer).toBeLessThan(pos.get(consumer)!.layer);
    }
  });

  it("gives independent roots layer zero and distinct rows", () => {
    const placed = layeredLayout([10, 20, 30], []);
    expect(placed.every((p) => p.layer === 0)).toBe(true);
    expect(new Set(placed.map((p) => p.row)).size).toBe(3);
  });

  it("does not cross two parallel chains", () => {
    // chain A: 1 -> 3 -> 5, chain B: 2 -> 4 -> 6
    const pos = byId(
      layeredLayout(
        [1, 2, 3, 4, 5, 6],
        [
          [1, 3],
          [2, 4],
          [3, 5],
          [4, 6],
        ],
      ),
    );
    const rowOrder = (a: number, b: number) =>
      Math.sign(pos.get(a)!.row - pos.get(b)!.row);
    expect(rowOrder(1, 2)).toBe(rowOrder(3, 4));
    expect(rowOrder(3, 4)).toBe(rowOrder(5, 6));
  });

  it("handles a single node", () => {
    expect(layeredLayout([42], [])).toEqual([{ id: 42, layer: 0, row: 0 }]);
  });
});
