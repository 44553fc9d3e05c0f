/* tslint:disable */
/* eslint-disable */

/**
 * One-bump family centred at ½: density and score `∂θ log p` across `[0,1]`.
 */
export function bump_family(h: number, theta: number, beta: number, points: number): string;

/**
 * `¼χ_sym ≤ JS ≤ (ln 2/2)χ_sym` for two sine-shift densities.
 */
export function js_sandwich(a1: number, f1: number, a2: number, f2: number): string;

/**
 * Density of `g(Y)`, `g(y) = y − a·sin(2πfy)`, `Y` uniform, on `points` grid nodes.
 */
export function pushforward_density(amplitude: number, frequency: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bump_family: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly js_sandwich: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly pushforward_density: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
