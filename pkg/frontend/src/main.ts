/** Browser entry point: mounts the annotator onto #app using the page's own
 * origin for the API and window.localStorage for resume-after-reload. */
import { ApiClient } from "./api.js";
import { mountApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const params = new URLSearchParams(window.location.search);
const handles = mountApp(root, {
  api: new ApiClient(""),
  storage: window.localStorage,
  defaultItemId: params.get("item") ?? "item-0000",
});

// a reload mid-session resumes at the server's pending question
void handles.controller.resume();
