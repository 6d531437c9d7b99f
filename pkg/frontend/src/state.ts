import type { AnswerSet, ApiError, QueryRequest } from "./api.js";

export const PAGE_SIZE = 20;

export type UiQueryState = {
  formulaText: string;
  keywordText: string;
  offset: number;
  lastAnswer: AnswerSet | null;
  lastError: ApiError | null;
  // id of the single expanded hit, if any; always one of lastAnswer's
  expandedHitId: string | null;
};

export function initialState(): UiQueryState {
  return {
    formulaText: "",
    keywordText: "",
    offset: 0,
    lastAnswer: null,
    lastError: null,
    expandedHitId: null,
  };
}

/** Keyword box splits on whitespace; the server treats each entry as a
 * case-insensitive substring filter. */
export function splitKeywords(text: string): string[] {
  return text.split(/\s+/).filter((word) => word.length > 0);
}

export function buildRequest(state: UiQueryState): QueryRequest {
  const request: QueryRequest = {
    formula: state.formulaText.trim(),
    limit: PAGE_SIZE,
    offset: state.offset,
  };
  const keywords = splitKeywords(state.keywordText);
  if (keywords.length > 0) {
    request.keywords = keywords;
  }
  return request;
}

export function canSubmit(state: UiQueryState): boolean {
  return state.formulaText.trim().length > 0;
}

export function hasPrevPage(state: UiQueryState): boolean {
  return state.offset > 0;
}

export function hasNextPage(state: UiQueryState): boolean {
  if (state.lastAnswer === null) {
    return false;
  }
  return state.offset + PAGE_SIZE < state.lastAnswer.total;
}

export function toggleExpanded(state: UiQueryState, hitId: string): void {
  state.expandedHitId = state.expandedHitId === hitId ? null : hitId;
}
