import init, { renderFrame, debounceTrace, estimateSize } from "./pkg/gvss_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, err) {
  target.replaceChildren();
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(err.message ?? err);
  target.append(p);
}

let lastUrl = null;

function render() {
  const out = $("frame-out");
  try {
    const r = renderFrame(
      num("src-w"), num("src-h"), num("seq"),
      num("w"), num("h"), $("constrain").checked,
      $("enc").value, $("time").checked, num("font"), Date.now(),
    );
    const bytes = r.bytes;
    if (lastUrl) URL.revokeObjectURL(lastUrl);
    lastUrl = URL.createObjectURL(new Blob([bytes], { type: r.mediaType }));
    const img = new Image();
    img.src = lastUrl;
    img.width = r.width;
    img.height = r.height;
    const info = document.createElement("p");
    info.textContent = `${r.width}×${r.height} ${r.mediaType}, ${bytes.length} bytes (estimate ${r.estimatedSize})`;
    out.replaceChildren(info, img);
    r.free();
  } catch (err) {
    fail(out, err);
  }
}

function debounce() {
  const out = $("debounce-out");
  try {
    const text = $("readings").value;
    const flat = debounceTrace(num("required"), text);
    const readings = text.split(/[\s,]+/).filter(Boolean);
    const accepted = new Map();
    for (let i = 0; i < flat.length; i += 2) accepted.set(flat[i], flat[i + 1] ? "OBSTRUCTED" : "CLEAR");

    const line = document.createElement("div");
    line.className = "timeline";
    readings.forEach((r, i) => {
      const span = document.createElement("span");
      const letter = r[0].toUpperCase();
      span.className = letter + (accepted.has(i) ? " accepted" : "");
      span.textContent = letter;
      span.title = accepted.has(i) ? `reading ${i}: accepted ${accepted.get(i)}` : `reading ${i}`;
      line.append(span);
    });
    const list = document.createElement("p");
    list.textContent = accepted.size === 0
      ? "no transitions accepted"
      : [...accepted].map(([i, s]) => `#${i} → ${s}`).join(", ");
    out.replaceChildren(line, list);
  } catch (err) {
    fail(out, err);
  }
}

function estimate() {
  const out = $("estimate-out");
  try {
    const n = estimateSize(num("est-w"), num("est-h"), $("est-enc").value);
    out.textContent = `${n} bytes`;
  } catch (err) {
    fail(out, err);
  }
}

await init();
$("render").addEventListener("click", render);
$("debounce").addEventListener("click", debounce);
$("estimate").addEventListener("click", estimate);
render();
debounce();
estimate();
