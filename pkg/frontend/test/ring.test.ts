import { describe, expect, it } from "vitest";

import { Ring } from "../src/ring.js";

describe("Ring", () => {
  it("keeps insertion order below capacity", () => {
    const r = new Ring<number>(4);
    [1, 2, 3].forEach((v) => r.push(v));
    expect(r.toArray()).toEqual([1, 2, 3]);
    expect(r.last()).toBe(3);
  });

  it("evicts the oldest at capacity", () => {
    const r = new Ring<number>(3);
    [1, 2, 3, 4, 5].forEach((v) => r.push(v));
    expect(r.toArray()).toEqual([3, 4, 5]);
    expect(r.length).toBe(3);
    expect(r.last()).toBe(5);
  });

  it("clear resets", () => {
    const r = new Ring<number>(2);
    r.push(1);
    r.clear();
    expect(r.length).toBe(0);
    expect(r.last()).toBeUndefined();
  });

  it("rejects nonsense capacity", () => {
    expect(() => new Ring(0)).toThrow();
  });
});
