import { spawnSync } from "node:child_process";

import { errorForExit } from "./errors.js";

/**
 * Resolve the CLI launcher. Override with TMSCLEAN_BIN (a full command
 * line, split on spaces), e.g. "python3 -m tmsclean.cli".
 */
export function cliCommand(): string[] {
  const env = process.env.TMSCLEAN_BIN;
  if (env && env.trim().length > 0) return env.trim().split(/\s+/);
  return ["tmsclean"];
}

export interface RunResult {
  stdout: string;
  stderr: string;
}

/** Run one CLI subcommand; throws a typed error on nonzero exit. */
export function runCli(args: string[]): RunResult {
  const [bin, ...pre] = cliCommand();
  const r = spawnSync(bin, [...pre, ...args], {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (r.error) throw r.error;
  if (r.status !== 0) throw errorForExit(r.status ?? -1, r.stderr ?? "");
  return { stdout: r.stdout ?? "", stderr: r.stderr ?? "" };
}
