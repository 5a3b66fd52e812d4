/** Errors mirroring the CLI exit-code contract (2/3/4). */

export class CliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(message);
    this.name = new.target.name;
  }
}

/** Exit code 2: invalid configuration or arguments. */
export class ConfigError extends CliError {}

/** Exit code 3: missing, malformed, or inconsistent data. */
export class DataError extends CliError {}

/** Exit code 4: numerical failure inside an algorithm. */
export class NumericalError extends CliError {}

export function errorForExit(code: number, stderr: string): CliError {
  const msg = stderr.trim().split("\n").pop() ?? `exit code ${code}`;
  switch (code) {
    case 2:
      return new ConfigError(msg, code, stderr);
    case 3:
      return new DataError(msg, code, stderr);
    case 4:
      return new NumericalError(msg, code, stderr);
    default:
      return new CliError(msg, code, stderr);
  }
}
