import { AppCore } from "./app.js";
import { ApiClient } from "./client.js";
import { mountApp } from "./dom.js";

const app = new AppCore(new ApiClient(""));
mountApp(document.getElementById("app")!, app);
