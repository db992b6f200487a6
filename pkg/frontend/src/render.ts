import { writeFileSync } from "node:fs";

export type Format = "svg" | "png";

export function formatFromPath(path: string, explicit?: string): Format {
  if (explicit === "svg" || explicit === "png") return explicit;
  if (explicit) throw new Error(`unsupported format "${explicit}" (svg|png)`);
  if (path.endsWith(".png")) return "png";
  return "svg";
}

export async function writeFigure(
  svgText: string,
  outPath: string,
  format: Format,
): Promise<void> {
  if (format === "svg") {
    writeFileSync(outPath, svgText);
    return;
  }
  const { Resvg } = await import("@resvg/resvg-js");
  const png = new Resvg(svgText, {
    fitTo: { mode: "original" },
    background: "white",
  })
    .render()
    .asPng();
  writeFileSync(outPath, png);
}
