// Static driver for the wasm demo. Build the module first:
//   wasm-pack build crates/coloc-wasm --target web --out-dir www/pkg
// then serve this directory (any static file server works).

import init, { simulate, lidar_scan, default_config } from "./pkg/coloc_wasm.js";

const COLORS = {
  dr: "#c0392b",
  sl: "#8e44ad",
  ccl: "#e67e22",
  dcl: "#2471a3",
  "ccl-lm": "#b7950b",
  "dcl-lm": "#1e8449",
};
const TRUTH = ["#555", "#999"];

function val(id) {
  return parseFloat(document.getElementById(id).value);
}

function bindOutputs(ids) {
  for (const id of ids) {
    const input = document.getElementById(id);
    const out = document.getElementById(id + "-out");
    const sync = () => (out.textContent = input.value);
    input.addEventListener("input", sync);
    sync();
  }
}

// World (6 x 7 m) to canvas transform.
function makeProjector(canvas, pad = 20) {
  const sx = (canvas.width - 2 * pad) / 6.0;
  const sy = (canvas.height - 2 * pad) / 7.0;
  const s = Math.min(sx, sy);
  return (x, y) => [pad + x * s, canvas.height - pad - y * s, s];
}

function drawWalls(ctx, project, walls) {
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 2;
  for (const [x1, y1, x2, y2] of walls) {
    const [ax, ay] = project(x1, y1);
    const [bx, by] = project(x2, y2);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
}

function runSimulation(methodsEnabled) {
  const config = {
    seed: Math.round(val("seed")),
    noise_scale: val("noise"),
    ccl_latency_steps: Math.round(val("lat")),
    drop_prob: val("drop"),
    methods: methodsEnabled,
  };
  const out = JSON.parse(simulate(JSON.stringify(config)));
  const canvas = document.getElementById("traj");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const project = makeProjector(canvas);

  drawWalls(ctx, project, out.walls);
  ctx.fillStyle = "#777";
  for (const [x, y] of out.landmarks) {
    const [px, py] = project(x, y);
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 7);
    ctx.fill();
    ctx.stroke();
  }

  // Truth paths.
  for (let r = 0; r < 2; r++) {
    ctx.strokeStyle = TRUTH[r];
    ctx.setLineDash([6, 4]);
    ctx.lineWidth = 2;
    ctx.beginPath();
    out.truth[r].forEach(([x, y], i) => {
      const [px, py] = project(x, y);
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.setLineDash([]);
  }

  // Estimates.
  for (const method of out.methods) {
    ctx.strokeStyle = COLORS[method.name] || "#000";
    ctx.lineWidth = 1.5;
    for (let r = 0; r < 2; r++) {
      ctx.beginPath();
      method.robots[r].forEach((p, i) => {
        const [px, py] = project(p.x, p.y);
        i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
      });
      ctx.stroke();
    }
  }

  // One-sigma ellipses for the last method, sampled sparsely.
  const last = out.methods[out.methods.length - 1];
  if (last) {
    ctx.strokeStyle = COLORS[last.name] || "#000";
    ctx.globalAlpha = 0.35;
    for (let r = 0; r < 2; r++) {
      for (let i = 0; i < last.robots[r].length; i += 20) {
        const p = last.robots[r][i];
        const [px, py, s] = project(p.x, p.y);
        ctx.beginPath();
        ctx.ellipse(px, py, Math.sqrt(p.p_xx) * s, Math.sqrt(p.p_yy) * s, 0, 0, 7);
        ctx.stroke();
      }
    }
    ctx.globalAlpha = 1.0;
  }

  // Metrics table and traffic counters.
  const table = document.getElementById("metrics");
  let html = "<tr><th>method</th><th>rmse r1 (m)</th><th>rmse r2 (m)</th><th>nees r1</th><th>nees r2</th></tr>";
  for (const m of out.methods) {
    html += `<tr><td style="color:${COLORS[m.name]}">${m.name}</td>` +
      `<td>${m.rmse_pos[0].toFixed(3)}</td><td>${m.rmse_pos[1].toFixed(3)}</td>` +
      `<td>${m.nees_mean[0].toFixed(2)}</td><td>${m.nees_mean[1].toFixed(2)}</td></tr>`;
  }
  table.innerHTML = html;

  const bw = out.methods.find((m) => m.bandwidth);
  const bwDiv = document.getElementById("bandwidth");
  if (bw) {
    const [sent, delivered, bytes] = bw.bandwidth;
    const pct = (100 * (1 - bytes / out.broadcast_bytes)).toFixed(1);
    bwDiv.textContent =
      `event-triggered link (${bw.name}): ${sent} attempts, ${delivered} packets, ` +
      `${bytes} B vs ${out.broadcast_bytes} B continuous broadcast (${pct}% less)`;
  } else {
    bwDiv.textContent = "";
  }

  const legend = document.getElementById("legend");
  legend.innerHTML =
    `<span><span class="swatch" style="background:#555"></span>truth</span>` +
    out.methods
      .map((m) => `<span><span class="swatch" style="background:${COLORS[m.name]}"></span>${m.name}</span>`)
      .join("");
}

function runScan() {
  const config = {
    observer: [val("sx"), val("sy"), val("sth")],
    companion: [val("mx"), val("my")],
    sigma_r: val("sr"),
    seed: 7,
  };
  const out = JSON.parse(lidar_scan(JSON.stringify(config)));
  const canvas = document.getElementById("scan");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const project = makeProjector(canvas);
  drawWalls(ctx, project, out.walls);

  const segColors = ["#2471a3", "#1e8449", "#c0392b", "#8e44ad", "#e67e22", "#16a085", "#7f8c8d"];
  out.points.forEach(([x, y], i) => {
    const seg = out.segment_of[i];
    ctx.fillStyle = segColors[seg % segColors.length];
    const [px, py] = project(x, y);
    ctx.fillRect(px - 1.5, py - 1.5, 3, 3);
  });

  // Scanner pose and marker.
  const [ox, oy] = project(config.observer[0], config.observer[1]);
  ctx.fillStyle = "#000";
  ctx.beginPath();
  ctx.arc(ox, oy, 6, 0, 7);
  ctx.fill();
  const th = (config.observer[2] * Math.PI) / 180;
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(ox, oy);
  ctx.lineTo(ox + 18 * Math.cos(th), oy - 18 * Math.sin(th));
  ctx.stroke();

  const [mxp, myp, s] = project(config.companion[0], config.companion[1]);
  ctx.strokeStyle = "#444";
  ctx.beginPath();
  ctx.arc(mxp, myp, 0.06 * s, 0, 7);
  ctx.stroke();

  const result = document.getElementById("scan-result");
  if (out.detection) {
    const [rho, phi] = out.detection;
    // Circle the detection in world coordinates.
    const wx = config.observer[0] + rho * Math.cos(th + phi);
    const wy = config.observer[1] + rho * Math.sin(th + phi);
    const [dx, dy] = project(wx, wy);
    ctx.strokeStyle = "#e74c3c";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(dx, dy, 10, 0, 7);
    ctx.stroke();
    ctx.lineWidth = 1;
    const [trho, tphi] = out.truth;
    result.innerHTML =
      `detected at range ${rho.toFixed(3)} m, bearing ${((phi * 180) / Math.PI).toFixed(1)}&deg; ` +
      `(truth ${trho.toFixed(3)} m, ${((tphi * 180) / Math.PI).toFixed(1)}&deg;), ` +
      `${out.kinds.length} segments`;
  } else {
    result.textContent = `no marker detected (${out.kinds.length} segments)`;
  }
}

async function main() {
  await init();
  const defaults = JSON.parse(default_config());

  bindOutputs(["seed", "noise", "lat", "drop", "sx", "sy", "sth", "mx", "my", "sr"]);

  // Method toggles.
  const toggles = document.getElementById("method-toggles");
  const enabled = new Set(defaults.simulate.methods);
  for (const name of defaults.method_names) {
    const label = document.createElement("label");
    label.style.display = "inline-block";
    label.style.marginRight = "0.8rem";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = enabled.has(name);
    box.addEventListener("change", () => {
      box.checked ? enabled.add(name) : enabled.delete(name);
      refreshSim();
    });
    label.append(box, ` ${name}`);
    toggles.append(label);
  }

  const refreshSim = () => runSimulation([...enabled]);
  for (const id of ["seed", "noise", "lat", "drop"]) {
    document.getElementById(id).addEventListener("change", refreshSim);
  }
  for (const id of ["sx", "sy", "sth", "mx", "my", "sr"]) {
    document.getElementById(id).addEventListener("input", runScan);
  }

  refreshSim();
  runScan();
}

main();
