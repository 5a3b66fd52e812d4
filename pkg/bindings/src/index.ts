export { cliCommand, runCli, type RunResult } from "./cli.js";
export {
  datasetHash,
  loadEpochs,
  loadRecording,
  type ChannelInfo,
  type EpochsDataset,
  type RecordingDataset,
} from "./dataset.js";
export {
  CliError,
  ConfigError,
  DataError,
  NumericalError,
} from "./errors.js";
export {
  pipeline,
  preprocess,
  score,
  simulate,
  sound,
  type SimulateOptions,
  type SoundOptions,
  type StageOptions,
} from "./stages.js";
