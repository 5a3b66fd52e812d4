import { runCli } from "./cli.js";

/** Options shared by every stage invocation. */
export interface StageOptions {
  /** input dataset base path (no extension) */
  input: string;
  /** output dataset base path (no extension) */
  output: string;
  /** INI config file */
  config?: string;
  seed?: number;
}

function common(o: StageOptions, extra: string[] = []): string[] {
  const args = ["--in", o.input, "--out", o.output, ...extra];
  if (o.config !== undefined) args.push("--config", o.config);
  if (o.seed !== undefined) args.push("--seed", String(o.seed));
  return args;
}

export interface SimulateOptions {
  output: string;
  seed?: number;
  trials?: number;
  channels?: number;
}

/** Generate a synthetic session with ground truth next to it. */
export function simulate(o: SimulateOptions): string {
  const args = ["simulate", "--out", o.output];
  if (o.seed !== undefined) args.push("--seed", String(o.seed));
  if (o.trials !== undefined) args.push("--trials", String(o.trials));
  if (o.channels !== undefined) args.push("--channels", String(o.channels));
  runCli(args);
  return o.output;
}

/** Pulse excision, band-pass, downsample, rejection, re-reference. */
export function preprocess(o: StageOptions): string {
  runCli(["preprocess", ...common(o)]);
  return o.output;
}

export interface SoundOptions extends StageOptions {
  lambda?: number;
  iterations?: number;
}

/** Iterative noise estimation and Wiener-style spatial correction. */
export function sound(o: SoundOptions): string {
  const extra: string[] = [];
  if (o.lambda !== undefined) extra.push("--sound-lambda", String(o.lambda));
  if (o.iterations !== undefined)
    extra.push("--sound-iterations", String(o.iterations));
  runCli(["sound", ...common(o, extra)]);
  return o.output;
}

/** Run a configured multi-stage pipeline; returns the run manifest. */
export function pipeline(o: StageOptions): Record<string, unknown> {
  const r = runCli(["pipeline", ...common(o)]);
  return JSON.parse(r.stdout);
}

/** Oracle score of cleaned epochs against simulator ground truth. */
export function score(input: string, truth: string): Record<string, unknown> {
  const r = runCli(["score", "--in", input, "--truth", truth]);
  return JSON.parse(r.stdout);
}
