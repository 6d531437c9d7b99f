import { checkHealth, runQuery, type FetchLike } from "./api.js";
import { renderAnswer, renderBanner, renderInlineError } from "./render.js";
import {
  PAGE_SIZE,
  buildRequest,
  canSubmit,
  hasNextPage,
  hasPrevPage,
  initialState,
  toggleExpanded,
  type UiQueryState,
} from "./state.js";

export type AppOptions = {
  server: string;
  fetchImpl?: FetchLike;
};

export type App = {
  state: UiQueryState;
  /** resolves when the in-flight query (if any) has settled */
  idle: () => Promise<void>;
};

/** Pick the backend from ?server=, falling back to the page's origin. */
export function resolveServer(search: string, origin: string): string {
  const fromQuery = new URLSearchParams(search).get("server");
  const base = fromQuery !== null && fromQuery !== "" ? fromQuery : origin;
  return base.replace(/\/+$/, "");
}

export function initApp(root: HTMLElement, options: AppOptions): App {
  const doc = root.ownerDocument;
  const fetchImpl = options.fetchImpl ?? fetch;
  const state = initialState();

  root.innerHTML = `
    <header class="masthead">
      <h1>xlsearch</h1>
      <p class="tagline">formula search: ?name matches anything, references match structurally</p>
    </header>
    <div class="banner" id="banner"></div>
    <form id="query-form">
      <input id="formula" type="text" autocomplete="off" spellcheck="false"
             placeholder="?fa+(?x-?a)/(?b-?a)*(?fb-?fa)" aria-label="formula query" />
      <input id="keywords" type="text" autocomplete="off"
             placeholder="keywords (optional)" aria-label="keyword filter" />
      <button id="submit" type="submit" disabled>search</button>
    </form>
    <div class="inline-error-slot" id="formula-error"></div>
    <div class="results-bar">
      <span id="counter"></span>
      <nav class="pager">
        <button id="prev" type="button" disabled>previous</button>
        <button id="next" type="button" disabled>next</button>
      </nav>
    </div>
    <ol id="results"></ol>
  `;

  const form = root.querySelector<HTMLFormElement>("#query-form")!;
  const formulaInput = root.querySelector<HTMLInputElement>("#formula")!;
  const keywordInput = root.querySelector<HTMLInputElement>("#keywords")!;
  const submitButton = root.querySelector<HTMLButtonElement>("#submit")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const inlineError = root.querySelector<HTMLElement>("#formula-error")!;
  const counter = root.querySelector<HTMLElement>("#counter")!;
  const results = root.querySelector<HTMLElement>("#results")!;
  const prevButton = root.querySelector<HTMLButtonElement>("#prev")!;
  const nextButton = root.querySelector<HTMLButtonElement>("#next")!;

  let inFlight: AbortController | null = null;
  let settled: Promise<void> = Promise.resolve();

  function syncControls(): void {
    submitButton.disabled = !canSubmit(state);
    prevButton.disabled = !hasPrevPage(state);
    nextButton.disabled = !hasNextPage(state);
  }

  function paint(): void {
    renderInlineError(inlineError, state.lastError);
    if (state.lastAnswer !== null) {
      renderAnswer(results, counter, state.lastAnswer, state.offset, state.expandedHitId, (hitId) => {
        toggleExpanded(state, hitId);
        paint();
      });
    }
    syncControls();
  }

  function markParsePosition(error: { position?: number }): void {
    if (error.position === undefined) {
      return;
    }
    const at = Math.min(error.position, formulaInput.value.length);
    formulaInput.focus();
    formulaInput.setSelectionRange(at, Math.min(at + 1, formulaInput.value.length));
  }

  async function issue(): Promise<void> {
    // later submissions cancel earlier renders: at most one in flight
    inFlight?.abort();
    const controller = new AbortController();
    inFlight = controller;

    const outcome = await runQuery(options.server, buildRequest(state), controller.signal, fetchImpl)
      .catch((err: unknown) => {
        if (err instanceof DOMException && err.name === "AbortError") {
          return null;
        }
        throw err;
      });
    if (outcome === null || controller !== inFlight) {
      return;
    }
    inFlight = null;

    switch (outcome.kind) {
      case "answers":
        state.lastAnswer = outcome.body;
        state.lastError = null;
        state.expandedHitId = null;
        renderBanner(banner, null);
        break;
      case "rejected":
        state.lastError = outcome.body;
        renderBanner(banner, null);
        markParsePosition(outcome.body);
        break;
      case "unreachable":
        // keep whatever is on screen; the query can simply be retried
        renderBanner(banner, `server unreachable (${outcome.detail})`, () => submit());
        break;
    }
    paint();
  }

  function submit(): void {
    if (!canSubmit(state)) {
      return;
    }
    settled = issue();
  }

  formulaInput.addEventListener("input", () => {
    state.formulaText = formulaInput.value;
    syncControls();
  });
  keywordInput.addEventListener("input", () => {
    state.keywordText = keywordInput.value;
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    state.offset = 0;
    submit();
  });
  prevButton.addEventListener("click", () => {
    state.offset = Math.max(0, state.offset - PAGE_SIZE);
    submit();
  });
  nextButton.addEventListener("click", () => {
    state.offset += PAGE_SIZE;
    submit();
  });

  void checkHealth(options.server, fetchImpl).then((ok) => {
    if (!ok) {
      renderBanner(banner, `no search service at ${options.server}`, () => {
        void checkHealth(options.server, fetchImpl).then((up) => {
          if (up) {
            renderBanner(banner, null);
          }
        });
      });
    }
  });

  syncControls();
  return { state, idle: () => settled };
}
