import { initApp, resolveServer } from "./app.js";

const root = document.getElementById("app");
if (root !== null) {
  initApp(root, { server: resolveServer(window.location.search, window.location.origin) });
}
