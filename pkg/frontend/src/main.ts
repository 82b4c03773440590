import { ViewModel } from "./model.js";
import { Console } from "./ui.js";

const root = document.getElementById("app");
if (root) {
  const console_ = new Console(root, new ViewModel());
  void console_.start();
}
