import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { parseCsvText } from "../src/csv.js";
import { convergenceFigure, renderFigure } from "../src/figures.js";

const DENSITY = `bin_mid_chi,mean,stderr,n,phi,gap,z
1.125,0.79,0.011,60,0.80,-0.01,-0.9
1.375,0.58,0.009,60,0.59,-0.01,-1.1
1.625,0.37,0.008,60,0.38,-0.01,-1.2
1.875,0.22,0.007,60,0.23,-0.01,-1.4
`;

const DENSITY_B = `bin_mid_chi,mean,stderr,n,phi,gap,z
1.125,0.795,0.006,240,0.80,-0.005,-0.8
1.375,0.585,0.005,240,0.59,-0.005,-1.0
1.625,0.375,0.004,240,0.38,-0.005,-1.2
`;

const REF = `r,tau,value
1.0,0.5,1.0
1.5,0.5,0.62
2.0,0.5,0.35
2.5,0.5,0.18
`;

const RESIDUAL = `r,tau,residual
1.2,0.2,1e-5
1.2,0.6,2e-5
2.0,0.2,4e-6
2.0,0.6,8e-6
3.0,0.2,1e-6
3.0,0.6,3e-6
`;

let dir: string;

beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), "plots-"));
  writeFileSync(join(dir, "density.csv"), DENSITY);
  writeFileSync(join(dir, "density_b.csv"), DENSITY_B);
  writeFileSync(join(dir, "ref.csv"), REF);
  writeFileSync(join(dir, "residual.csv"), RESIDUAL);
  writeFileSync(join(dir, "empty.csv"), "");
  writeFileSync(join(dir, "badcols.csv"), "x,y\n1,2\n");
});

describe("golden-CSV smoke test (all three kinds)", () => {
  it("overlay renders svg with exit 0", async () => {
    const out = join(dir, "overlay.svg");
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "density.csv"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    const body = readFileSync(out, "utf8");
    expect(body.length).toBeGreaterThan(500);
    expect(body).toContain("<svg");
    expect(body).toContain("polyline"); // the phi reference curve
    expect(body).toContain("circle");   // the Monte Carlo points
  });

  it("convergence renders one series per input CSV", async () => {
    const out = join(dir, "conv.svg");
    const code = await main([
      "render", "--kind", "convergence",
      "--in", join(dir, "density.csv"),
      "--in", join(dir, "density_b.csv"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    const body = readFileSync(out, "utf8");
    const nSeries = (body.match(/<polyline/g) ?? []).length;
    expect(nSeries).toBe(2);
  });

  it("residual renders a heatmap with a colorbar", async () => {
    const out = join(dir, "res.svg");
    const code = await main([
      "render", "--kind", "residual", "--in", join(dir, "residual.csv"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    const body = readFileSync(out, "utf8");
    expect((body.match(/<rect/g) ?? []).length).toBeGreaterThan(6 + 40);
  });

  it("overlay accepts an external reference curve", async () => {
    const out = join(dir, "overlay_ref.svg");
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "density.csv"),
      "--ref", join(dir, "ref.csv"), "--out", out,
    ]);
    expect(code).toBe(0);
  });

  it("renders png when requested", async () => {
    const out = join(dir, "overlay.png");
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "density.csv"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    const bytes = readFileSync(out);
    expect(bytes.subarray(0, 8)).toEqual(
      Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    );
  });
});

describe("failure modes", () => {
  it("empty CSV exits nonzero", async () => {
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "empty.csv"),
      "--out", join(dir, "nope.svg"),
    ]);
    expect(code).toBe(1);
  });

  it("schema violation exits nonzero and names the columns", async () => {
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "badcols.csv"),
      "--out", join(dir, "nope.svg"),
    ]);
    expect(code).toBe(1);
  });

  it("usage errors exit 2", async () => {
    expect(await main(["render", "--kind", "overlay"])).toBe(2);
    expect(await main(["plot"])).toBe(2);
    expect(
      await main(["render", "--kind", "mystery", "--in", "x", "--out", "y"]),
    ).toBe(2);
  });

  it("missing input file exits 1", async () => {
    const code = await main([
      "render", "--kind", "overlay", "--in", join(dir, "ghost.csv"),
      "--out", join(dir, "nope.svg"),
    ]);
    expect(code).toBe(1);
  });
});

describe("rendering properties", () => {
  it("reruns are byte-identical (no embedded timestamps)", async () => {
    const a = join(dir, "idem_a.svg");
    const b = join(dir, "idem_b.svg");
    const argv = (out: string) => [
      "render", "--kind", "overlay", "--in", join(dir, "density.csv"),
      "--out", out,
    ];
    expect(await main(argv(a))).toBe(0);
    expect(await main(argv(b))).toBe(0);
    expect(readFileSync(a, "utf8")).toBe(readFileSync(b, "utf8"));
  });

  it("convergence requires gap or mean+phi", () => {
    const t = parseCsvText("bin_mid_chi,mean\n1,0.5\n", "x.csv");
    expect(() =>
      convergenceFigure({ kind: "convergence", inputs: [t] }),
    ).toThrow(/gap column or mean\+phi/);
  });

  it("unknown figure kind is rejected at the library level", () => {
    const t = parseCsvText(DENSITY, "d.csv");
    expect(() =>
      renderFigure({ kind: "sparkline" as never, inputs: [t] }),
    ).toThrow(/unknown figure kind/);
  });
});
