import { ApiClient } from "./api.js";
import { App } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

// served by the angioforge service under /ui, so the API is same-origin
const app = new App(new ApiClient(""), root);
app.render();
