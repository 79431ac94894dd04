/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of a bending run: per-knot energies and the final fields.
 */
export class BendingRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    balance(): Float64Array;
    /**
     * Out-of-plane displacement `v` at the nodes, row by row.
     */
    deflection(): Float64Array;
    dissipation(): Float64Array;
    elastic(): Float64Array;
    /**
     * Cells per side.
     */
    n(): number;
    /**
     * Largest `|p|` over the quadrature points of each cell, row by row.
     */
    plastic(): Float64Array;
    t(): Float64Array;
    work(): Float64Array;
}

export function bendPlate(von_karman: boolean, sigma_y: number, amplitude: number, n: number, steps: number): BendingRun;

export function cyclicCurve(lam: number, mu: number, k: number, sigma_y: number, amplitude: number, n: number): Float64Array;

export function dissipationBound(m: Float64Array, sigma_y: number, segments: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_bendingrun_free: (a: number, b: number) => void;
    readonly bendPlate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly bendingrun_balance: (a: number) => [number, number];
    readonly bendingrun_deflection: (a: number) => [number, number];
    readonly bendingrun_dissipation: (a: number) => [number, number];
    readonly bendingrun_elastic: (a: number) => [number, number];
    readonly bendingrun_n: (a: number) => number;
    readonly bendingrun_plastic: (a: number) => [number, number];
    readonly bendingrun_t: (a: number) => [number, number];
    readonly bendingrun_work: (a: number) => [number, number];
    readonly cyclicCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly dissipationBound: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
