/* tslint:disable */
/* eslint-disable */

export class Recovery {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly coverage: number;
    /**
     * NaN outside the effective set.
     */
    readonly estimate: Float64Array;
    readonly rel_error: number;
    readonly truth: Float64Array;
}

/**
 * Solution of `(−Δ)^low u + (−Δ)^high u + q u = 0` in Ω with
 * `q = q_scale·(1 + x²)` and a bump of exterior data centered at `center`.
 */
export function forward_solve(points: number, low: number, high: number, q_scale: number, center: number): Float64Array;

/**
 * `(−Δ)^order` of the bump `exp(−(x/width)²)`.
 */
export function fractional_laplacian(points: number, order: number, width: number): Float64Array;

/**
 * Node coordinates of an `points`-node grid.
 */
export function nodes(points: number): Float64Array;

/**
 * Measures `u` for the potential `1 + amplitude·cos(πx)` and recovers the
 * potential pointwise where `|u| ≥ tau·max|u|`.
 */
export function recover_potential(points: number, low: number, high: number, amplitude: number, tau: number): Recovery;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_recovery_free: (a: number, b: number) => void;
    readonly forward_solve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly fractional_laplacian: (a: number, b: number, c: number) => [number, number, number, number];
    readonly nodes: (a: number) => [number, number, number, number];
    readonly recover_potential: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly recovery_coverage: (a: number) => number;
    readonly recovery_estimate: (a: number) => [number, number];
    readonly recovery_rel_error: (a: number) => number;
    readonly recovery_truth: (a: number) => [number, number];
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
