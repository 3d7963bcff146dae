/* tslint:disable */
/* eslint-disable */

/**
 * Buys a spot instance on a synthetic market at `start_minute` with a
 * maximum price `premium` above the current price and keeps it for up to
 * `hours`, unless the market revokes it first.
 */
export function explore_billing(seed: number, start_minute: number, hours: number, premium: number): string;

/**
 * Generates a loss curve, fits the first `theta · max_steps` steps and
 * extrapolates both the staged and the single-stage fit to `max_steps`.
 */
export function explore_curve(two_stage: boolean, sigma: number, theta: number, max_steps: number, seed: number): string;

/**
 * Simulates the demo workload once per θ in 0.1, 0.2, ..., 1.0 on a
 * synthetic market and returns one row per θ.
 */
export function sweep_theta(seed: number, max_steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explore_billing: (a: number, b: number, c: number, d: number) => [number, number];
    readonly explore_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly sweep_theta: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
