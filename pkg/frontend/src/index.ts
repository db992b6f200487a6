export { SchemaError, parseCsvText, readCsv, requireColumns, column } from "./csv.js";
export { renderFigure, overlayFigure, convergenceFigure, residualFigure } from "./figures.js";
export type { FigureJob, FigureKind } from "./figures.js";
export { writeFigure, formatFromPath } from "./render.js";
export { main } from "./cli.js";
