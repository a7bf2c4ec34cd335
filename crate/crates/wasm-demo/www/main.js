import init, { generate, permute, two_mode_squeezed } from "./pkg/cvent_wasm.js";

const CLASSES = {
  3: ["FULLY_SEP", "BISEP", "FULLY_INSEP"],
  4: ["FULLY_SEP", "TRISEP", "BISEP_22", "BISEP_13", "FULLY_INSEP"],
};
const QPAIRS = ["XX", "XP", "PX", "PP"];
const $ = (id) => document.getElementById(id);
let current = null;

function paint(canvas, values, n) {
  canvas.width = n;
  canvas.height = n;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  const max = Math.max(...values) || 1;
  values.forEach((v, i) => {
    const g = Math.round(255 * (1 - v / max));
    img.data.set([g, g, 255, 255], 4 * i);
  });
  ctx.putImageData(img, 0, 0);
}

function show(target, grids, n, names) {
  const cells = n * n;
  const count = grids.length / cells;
  target.style.gridTemplateColumns = `repeat(${Math.min(count, 8)}, max-content)`;
  target.replaceChildren();
  for (let i = 0; i < count; i++) {
    const tile = document.createElement("div");
    tile.className = "tile";
    const c = document.createElement("canvas");
    paint(c, grids.subarray(i * cells, (i + 1) * cells), n);
    tile.append(c, document.createElement("br"), names(i));
    target.append(tile);
  }
}

const letter = (k) => String.fromCharCode(65 + k);
const groupName = (parties) => (i) => {
  const k = Math.floor(i / 4);
  const others = [...Array(parties).keys()].filter((l) => l !== k).map(letter).join("");
  return `${letter(k)}, M${others} ${QPAIRS[i % 4]}`;
};

function fillClasses() {
  const p = +$("parties").value;
  $("cls").replaceChildren(...CLASSES[p].map((c, i) => new Option(c, i)));
  $("perm").value = p === 3 ? "1,0,2" : "1,0,2,3";
}

function run(fn) {
  try {
    $("status").textContent = "";
    fn();
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function onGenerate() {
  run(() => {
    const p = +$("parties").value;
    current = generate(p, +$("cls").value, +$("seed").value, +$("cutoff").value);
    const part = current.partition();
    $("info").textContent = `label ${current.label()}${part ? ` on ${part}` : ""}`;
    show($("sample"), current.grids(), current.n_bins(), groupName(p));
  });
}

function onPermute() {
  if (!current) return;
  run(() => {
    const perm = Uint32Array.from($("perm").value.split(",").map(Number));
    const twin = permute(current, perm);
    const part = twin.partition();
    $("pinfo").textContent = `label ${twin.label()}${part ? ` on ${part}` : ""}`;
    show($("permuted"), twin.grids(), twin.n_bins(), groupName(twin.parties()));
  });
}

function onTmsv() {
  run(() => {
    const t = two_mode_squeezed(+$("sq").value, +$("eta").value, 12);
    $("tinfo").textContent =
      `s = ${$("sq").value}, η = ${$("eta").value}: negativity ${t.negativity().toFixed(4)} (lossless ${t.lossless().toFixed(4)})`;
    show($("tmsv"), t.grids(), t.n_bins(), (i) => QPAIRS[i]);
  });
}

await init();
$("status").textContent = "";
fillClasses();
$("parties").onchange = fillClasses;
$("gen").onclick = onGenerate;
$("apply").onclick = onPermute;
$("sq").oninput = onTmsv;
$("eta").oninput = onTmsv;
onGenerate();
onTmsv();
