import type { AnswerSet, ApiError, Hit } from "./api.js";
import { sanitizeSnippet } from "./sanitize.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderHit(doc: Document, hit: Hit, expanded: boolean, onToggle: (hitId: string) => void): HTMLLIElement {
  const item = el(doc, "li", "hit");
  item.dataset.hitId = hit.id;

  const head = el(doc, "button", "hit-head");
  head.type = "button";
  head.setAttribute("aria-expanded", String(expanded));
  head.appendChild(el(doc, "code", "hit-formula", hit.rawFormula));
  head.appendChild(el(doc, "span", "hit-uri", `${hit.uri} ${hit.sheet}!${hit.region}`));
  head.appendChild(el(doc, "span", "hit-keywords", hit.keywords.join(", ")));
  head.addEventListener("click", () => onToggle(hit.id));
  item.appendChild(head);

  if (expanded) {
    const box = el(doc, "div", "hit-snippet");
    const table = sanitizeSnippet(hit.snippet, doc);
    if (table !== null) {
      box.appendChild(table);
    } else {
      box.appendChild(el(doc, "p", "snippet-missing", "no snippet for this hit"));
    }
    item.appendChild(box);
  }
  return item;
}

export function renderAnswer(
  list: HTMLElement,
  counter: HTMLElement,
  answer: AnswerSet,
  offset: number,
  expandedHitId: string | null,
  onToggle: (hitId: string) => void,
): void {
  const doc = list.ownerDocument;
  list.textContent = "";
  for (const hit of answer.hits) {
    list.appendChild(renderHit(doc, hit, hit.id === expandedHitId, onToggle));
  }
  if (answer.total === 0) {
    counter.textContent = "no hits";
  } else {
    const last = offset + answer.hits.length;
    counter.textContent = `hits ${offset + 1}-${last} of ${answer.total}`;
  }
}

/** Parse failures and other rejections render next to the input; the
 * typed formula is left untouched. */
export function renderInlineError(slot: HTMLElement, error: ApiError | null): void {
  slot.textContent = "";
  if (error === null) {
    return;
  }
  const doc = slot.ownerDocument;
  let text = error.error;
  if (error.position !== undefined && !text.includes(`position ${error.position}`)) {
    text += ` (at position ${error.position})`;
  }
  slot.appendChild(el(doc, "span", "inline-error", text));
}

export function renderBanner(slot: HTMLElement, message: string | null, onRetry?: () => void): void {
  slot.textContent = "";
  if (message === null) {
    return;
  }
  const doc = slot.ownerDocument;
  slot.appendChild(el(doc, "span", "banner-text", message));
  if (onRetry) {
    const retry = el(doc, "button", "banner-retry", "retry");
    retry.type = "button";
    retry.addEventListener("click", onRetry);
    slot.appendChild(retry);
  }
}
