export { ArtifactError, readTable, requireColumns } from "./csv.js";
export type { Table } from "./csv.js";
export {
  armPair,
  loadDifferences,
  loadRiskHistory,
  preferredArm,
  toGridSeries,
} from "./artifacts.js";
export type { ArmPair, GridSeries, RiskHistory } from "./artifacts.js";
export {
  FIGURE_IDS,
  buildConvergence,
  buildDifferences,
  buildFigure,
  buildInit,
  buildSnapshots,
  spacedIndices,
} from "./figures.js";
export type { Figure, FigureId } from "./figures.js";
export { composeFigure, fmt, renderHeatPanel, renderLinePanel } from "./svg.js";
