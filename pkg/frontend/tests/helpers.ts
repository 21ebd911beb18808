import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import type { FetchLike } from "../src/api";

export function fx<T = any>(name: string): T {
  const path = resolve(process.cwd(), "tests", "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf8"));
}

export interface RecordedPost {
  path: string;
  body: any;
}

interface ErrorReply {
  __status: number;
  detail: string;
}

type Route = unknown | ((body: any) => unknown);

export function errorReply(status: number, detail: string): ErrorReply {
  return { __status: status, detail };
}

/** Route-table fetch stub: keys are "METHOD /path"; POST bodies recorded. */
export function stubFetch(routes: Record<string, Route>): FetchLike & { posts: RecordedPost[] } {
  const posts: RecordedPost[] = [];
  const impl = (async (input: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const key = `${method} ${input}`;
    if (!(key in routes)) {
      return jsonResponse({ detail: `no stub for ${key}` }, 404);
    }
    let value = routes[key];
    if (method === "POST") {
      const body = init?.body ? JSON.parse(String(init.body)) : null;
      posts.push({ path: input, body });
      if (typeof value === "function") value = value(body);
    } else if (typeof value === "function") {
      value = value(null);
    }
    const error = value as ErrorReply;
    if (error && typeof error === "object" && "__status" in error) {
      return jsonResponse({ detail: error.detail }, error.__status);
    }
    return jsonResponse(value, 200);
  }) as FetchLike & { posts: RecordedPost[] };
  impl.posts = posts;
  return impl;
}

function jsonResponse(doc: unknown, status: number): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Fails `times` requests with a network error, then delegates. */
export function flakyFetch(times: number, then: FetchLike): FetchLike {
  let failures = 0;
  return async (input, init) => {
    if (failures < times) {
      failures += 1;
      throw new TypeError("fetch failed");
    }
    return then(input, init);
  };
}

export function mount(): HTMLElement {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.append(root);
  return root;
}
