import init, { dseCurve, decompose, compareStyles, networkNames } from "./pkg/bitcompose_web.js";

const $ = (id) => document.getElementById(id);

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const tr = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

function guard(out, fn) {
  try {
    out.innerHTML = fn();
  } catch (e) {
    out.innerHTML = `<p class="err">${e.message ?? e}</p>`;
  }
}

function renderDse() {
  guard($("dse-out"), () => {
    const pts = JSON.parse(dseCurve(Number($("dse-sw").value)));
    const max = Math.max(...pts.map((p) => p.power));
    return table(
      ["L", "power", "area", "add share", ""],
      pts.map((p) => [
        p.lanes,
        p.power.toFixed(3),
        p.area.toFixed(3),
        (100 * p.power_parts.add / p.power).toFixed(0) + "%",
        `<span class="bar" style="width:${(200 * p.power) / max}px"></span>`,
      ]),
    ) + "<p>Normalized to one 8-bit MAC.</p>";
  });
}

function renderDecompose() {
  guard($("dec-out"), () => {
    const r = JSON.parse(decompose(
      $("dec-x").value, $("dec-w").value,
      Number($("dec-bx").value), Number($("dec-bw").value), true,
      Number($("dec-sw").value), Number($("dec-lanes").value),
    ));
    const p = r.plan;
    return `<p>Padded to ${p.bw_x}x${p.bw_w} bits: ${p.nbves} NBVEs in ${p.clusters} clusters of ${p.nbves_per_cluster},
      ${p.macs_per_cycle} MACs per cycle.</p>` +
      table(["j", "k", "plane dot", "shift", "contribution"],
        r.products.map((q) => [q.j, q.k, q.value, q.shift, q.shifted])) +
      `<p>sum = ${r.sum}, exact = ${r.exact}</p>`;
  });
}

function renderCompare() {
  guard($("cmp-out"), () => {
    const rows = JSON.parse(compareStyles($("cmp-net").value, $("cmp-mem").value, $("cmp-homo").checked));
    return table(
      ["style", "array", "runtime (ms)", "energy (mJ)", "speedup", "energy gain"],
      rows.map((r) => [
        r.style, r.array, (1e3 * r.runtime_s).toFixed(3), (r.energy_pj * 1e-9).toFixed(3),
        r.speedup.toFixed(2) + "x", r.energy_reduction.toFixed(2) + "x",
      ]),
    );
  });
}

await init();
for (const n of JSON.parse(networkNames())) $("cmp-net").add(new Option(n));
$("dse-sw").onchange = renderDse;
for (const id of ["dec-x", "dec-w", "dec-bx", "dec-bw", "dec-sw", "dec-lanes"]) $(id).oninput = renderDecompose;
for (const id of ["cmp-net", "cmp-mem", "cmp-homo"]) $(id).onchange = renderCompare;
renderDse();
renderDecompose();
renderCompare();
