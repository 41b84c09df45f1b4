import type { Transport, TransportResponse } from "../src/api.js";

export interface Exchange {
  method: string;
  path: string;
  body?: unknown;
  status: number;
  response: unknown;
}

function deepEqual(a: unknown, b: unknown): boolean {
  if (a === b) return true;
  if (typeof a !== typeof b || a === null || b === null) return false;
  if (typeof a !== "object") return false;
  const ka = Object.keys(a as object).sort();
  const kb = Object.keys(b as object).sort();
  if (ka.length !== kb.length || ka.some((k, i) => k !== kb[i])) return false;
  return ka.every((k) =>
    deepEqual((a as Record<string, unknown>)[k], (b as Record<string, unknown>)[k]),
  );
}

// Replays a recorded service session; any deviation from the recorded
// request sequence is an error, so the client provably drives the protocol
// exactly as recorded.
export class FakeTransport implements Transport {
  private index = 0;

  constructor(private readonly exchanges: Exchange[]) {}

  get consumed(): number {
    return this.index;
  }

  get finished(): boolean {
    return this.index === this.exchanges.length;
  }

  peek(): Exchange | undefined {
    return this.exchanges[this.index];
  }

  async request(method: string, path: string, body?: unknown): Promise<TransportResponse> {
    const expected = this.exchanges[this.index];
    if (!expected) {
      throw new Error(`fixture exhausted at ${method} ${path}`);
    }
    if (expected.method !== method || expected.path !== path) {
      throw new Error(
        `expected ${expected.method} ${expected.path}, client sent ${method} ${path}`,
      );
    }
    if (expected.body !== undefined && !deepEqual(expected.body, body)) {
      throw new Error(
        `body mismatch at ${method} ${path}: expected ${JSON.stringify(expected.body)}, got ${JSON.stringify(body)}`,
      );
    }
    this.index += 1;
    return { status: expected.status, body: structuredClone(expected.response) };
  }
}
