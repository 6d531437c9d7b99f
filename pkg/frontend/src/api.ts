// Client for the search service. The page talks to exactly two
// endpoints: GET /health and POST /query.

export type Hit = {
  id: string;
  uri: string;
  sheet: string;
  region: string;
  rawFormula: string;
  keywords: string[];
  snippet: string;
  bindings: Record<string, string>;
};

export type AnswerSet = {
  total: number;
  hits: Hit[];
};

export type QueryRequest = {
  formula: string;
  keywords?: string[];
  limit?: number;
  offset?: number;
};

// error body as the server sends it; position is a character offset
// into the formula when the problem is a parse error
export type ApiError = {
  error: string;
  position?: number;
};

export type QueryOutcome =
  | { kind: "answers"; body: AnswerSet }
  | { kind: "rejected"; status: number; body: ApiError }
  | { kind: "unreachable"; detail: string };

export type FetchLike = typeof fetch;

function asApiError(status: number, raw: unknown): ApiError {
  if (raw !== null && typeof raw === "object" && "error" in raw) {
    const body = raw as { error: unknown; position?: unknown };
    return {
      error: String(body.error),
      position: typeof body.position === "number" ? body.position : undefined,
    };
  }
  return { error: `server answered ${status}` };
}

/** POST the query; never throws except on abort. */
export async function runQuery(
  server: string,
  request: QueryRequest,
  signal: AbortSignal,
  fetchImpl: FetchLike = fetch,
): Promise<QueryOutcome> {
  let response: Response;
  try {
    response = await fetchImpl(server + "/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
      signal,
    });
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") {
      throw err;
    }
    return { kind: "unreachable", detail: String(err) };
  }

  let raw: unknown;
  try {
    raw = await response.json();
  } catch {
    return { kind: "unreachable", detail: "server sent a non-JSON reply" };
  }

  if (!response.ok) {
    return { kind: "rejected", status: response.status, body: asApiError(response.status, raw) };
  }
  return { kind: "answers", body: raw as AnswerSet };
}

export async function checkHealth(
  server: string,
  fetchImpl: FetchLike = fetch,
): Promise<boolean> {
  try {
    const response = await fetchImpl(server + "/health");
    return response.ok;
  } catch {
    return false;
  }
}
