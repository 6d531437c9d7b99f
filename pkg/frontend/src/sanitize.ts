// Snippets arrive from the server as HTML table markup. They are data,
// not trusted page content, so they never go through innerHTML: the
// markup is parsed inert and rebuilt element by element, keeping only
// table structure and text.

const ALLOWED = new Set(["table", "thead", "tbody", "tr", "td", "th"]);

function rebuild(source: Element, doc: Document): Element | null {
  const tag = source.tagName.toLowerCase();
  if (!ALLOWED.has(tag)) {
    return null;
  }
  // attributes (class, colspan, event handlers, ...) are dropped wholesale
  const copy = doc.createElement(tag);
  for (const child of Array.from(source.childNodes)) {
    if (child.nodeType === Node.TEXT_NODE) {
      copy.appendChild(doc.createTextNode(child.textContent ?? ""));
    } else if (child.nodeType === Node.ELEMENT_NODE) {
      const built = rebuild(child as Element, doc);
      if (built !== null) {
        copy.appendChild(built);
      }
    }
  }
  return copy;
}

/** Parse snippet markup and return a clean table element, or null when
 * the snippet has no table at all. */
export function sanitizeSnippet(markup: string, doc: Document = document): HTMLTableElement | null {
  const parsed = new DOMParser().parseFromString(markup, "text/html");
  const table = parsed.querySelector("table");
  if (table === null) {
    return null;
  }
  return rebuild(table, doc) as HTMLTableElement | null;
}
