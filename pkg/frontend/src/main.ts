import { Session } from "./session.js";
import { createView } from "./view.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const proto = location.protocol === "https:" ? "wss" : "ws";
const session = new Session(`${proto}://${location.host}/ws`, {
  onChange: (state) => view.render(state),
  onInvalidControl: (reason) => console.warn("control rejected locally:", reason),
});
const view = createView(root, (control) => session.dispatch(control));
view.render(session.state);
session.connect();
