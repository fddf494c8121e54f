import type { SessionReport } from "./types";

export interface MethodRow {
  method: string;
  n: number;
  meanSignedPct: number;
  meanAbsolutePct: number;
}

export interface ResultsView {
  /** The server's report body, byte for byte. */
  raw: string;
  report: SessionReport;
  perMethod: MethodRow[];
  perKind: Array<{ kind: string; n: number; meanSignedPct: number; meanAbsolutePct: number }>;
  /** (level, mean misestimation %) points of the fitted passive-trial line. */
  petRegressionLine: Array<[number, number]> | null;
}

/**
 * Results screen model. All numbers are echoed from the server report; the
 * client computes nothing beyond the points of the reported regression line.
 */
export function buildResultsView(rawReport: string): ResultsView {
  const report = JSON.parse(rawReport) as SessionReport;
  const perMethod: MethodRow[] = Object.entries(report.amt_by_method ?? {})
    .map(([method, row]) => ({
      method,
      n: row.n,
      meanSignedPct: row.mean_signed_pct,
      meanAbsolutePct: row.mean_absolute_pct,
    }));
  const perKind = Object.entries(report.by_kind).map(([kind, row]) => ({
    kind,
    n: row.n,
    meanSignedPct: row.mean_signed_pct,
    meanAbsolutePct: row.mean_absolute_pct,
  }));
  let line: Array<[number, number]> | null = null;
  const reg = report.by_kind.pet?.regression as
    { signed?: { coef: number[] } } | undefined;
  if (reg?.signed && Array.isArray(reg.signed.coef)) {
    const [slope, intercept] = reg.signed.coef;
    line = [-20, -10, 0, 10, 20].map(
      (level) => [level, slope * level + intercept]);
  }
  return { raw: rawReport, report, perMethod, perKind, petRegressionLine: line };
}
