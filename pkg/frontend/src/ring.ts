// Fixed-capacity ring buffer; oldest entries evicted on overflow.

export class Ring<T> {
  private buf: T[] = [];
  private head = 0; // index of the oldest element once full

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("ring capacity must be >= 1");
  }

  get length(): number {
    return this.buf.length;
  }

  push(item: T): void {
    if (this.buf.length < this.capacity) {
      this.buf.push(item);
    } else {
      this.buf[this.head] = item;
      this.head = (this.head + 1) % this.capacity;
    }
  }

  last(): T | undefined {
    if (this.buf.length === 0) return undefined;
    const idx = (this.head + this.buf.length - 1) % this.buf.length;
    return this.buf[idx];
  }

  // oldest -> newest
  toArray(): T[] {
    return this.buf.slice(this.head).concat(this.buf.slice(0, this.head));
  }

  clear(): void {
    this.buf = [];
    this.head = 0;
  }
}
