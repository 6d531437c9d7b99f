// Shared plumbing for the UI tests: frozen service replies captured
// from a live server once (tests stay hermetic, the wire format stays
// honest), plus a scriptable stand-in for fetch.

import interpolation from "./fixtures/query_interpolation.json";
import parseError from "./fixtures/query_parse_error.json";
import type { AnswerSet, ApiError, FetchLike } from "../src/api.js";

export const INTERPOLATION_QUERY = "?fa+(?x-?a)/(?b-?a)*(?fb-?fa)";
export const INTERPOLATION_ANSWER = interpolation as AnswerSet;
export const PARSE_ERROR_BODY = parseError as ApiError;

export type Exchange = {
  url: string;
  init: RequestInit | undefined;
  body: unknown;
};

export type Reply =
  | { status: number; json: unknown }
  | { networkError: string }
  | { hang: true };

/** fetch double: answers /health with 200 and pops one scripted reply
 * per /query call, recording what was sent. */
export function scriptedFetch(replies: Reply[]): { fetchImpl: FetchLike; exchanges: Exchange[] } {
  const queue = [...replies];
  const exchanges: Exchange[] = [];

  const fetchImpl: FetchLike = (input, init) => {
    const url = String(input);
    if (url.endsWith("/health")) {
      return Promise.resolve(jsonResponse(200, { status: "ok" }));
    }
    const sent = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    exchanges.push({ url, init: init ?? undefined, body: sent });

    const reply = queue.shift();
    if (reply === undefined) {
      throw new Error("fetch double ran out of scripted replies");
    }
    if ("networkError" in reply) {
      return Promise.reject(new TypeError(reply.networkError));
    }
    if ("hang" in reply) {
      return new Promise((_resolve, reject) => {
        init?.signal?.addEventListener("abort", () => {
          reject(new DOMException("The operation was aborted.", "AbortError"));
        });
      });
    }
    return Promise.resolve(jsonResponse(reply.status, reply.json));
  };

  return { fetchImpl, exchanges };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function typeInto(input: HTMLInputElement, text: string): void {
  input.value = text;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}
