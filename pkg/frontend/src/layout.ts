export interface Placed {
  id: number;
  layer: number;
  row: number;
}

/** Layered DAG placement: dependencies always end up in a strictly
 * lower layer than their dependents, so drawing layers left to right
 * puts producers left of consumers. Rows within a layer are ordered by
 * the mean row of their dependencies (one barycenter pass), which keeps
 * parallel branches from crossing in the common cases.
 */
export function layeredLayout(ids: number[], edges: [number, number][]): Placed[] {
  const deps = new Map<number, number[]>();
  for (const id of ids) {
    deps.set(id, []);
  }
  for (const [producer, consumer] of edges) {
    deps.get(consumer)?.push(producer);
  }

  const layer = new Map<number, number>();
  const assign = (id: number): number => {
    const known = layer.get(id);
    if (known !== undefined) {
      return known;
    }
    const above = deps.get(id) ?? [];
    const value = above.length ? 1 + Math.max(...above.map(assign)) : 0;
    layer.set(id, value);
    return value;
  };
  // ids ascend in topological order in practice, so the recursion is shallow
  for (const id of [...ids].sort((a, b) => a - b)) {
    assign(id);
  }

  const byLayer = new Map<number, number[]>();
  for (const id of ids) {
    const l = layer.get(id) as number;
    const members = byLayer.get(l);
    if (members) {
      members.push(id);
    } else {
      byLayer.set(l, [id]);
    }
  }

  const row = new Map<number, number>();
  for (const l of [...byLayer.keys()].sort((a, b) => a - b)) {
    const members = (byLayer.get(l) as number[]).sort((a, b) => a - b);
    if (l > 0) {
      const barycenter = (id: number): number => {
        const rows = (deps.get(id) ?? [])
          .map((d) => row.get(d))
          .filter((r): r is number => r !== undefined);
        return rows.length ? rows.reduce((s, r) => s + r, 0) / rows.length : Number.MAX_SAFE_INTEGER;
      };
      members.sort((a, b) => barycenter(a) - barycenter(b) || a - b);
    }
    members.forEach((id, i) => row.set(id, i));
  }

  return ids.map((id) => ({ id, layer: layer.get(id) as number, row: row.get(id) as number }));
}
