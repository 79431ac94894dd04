/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_bendingrun_free: (a: number, b: number) => void;
export const bendPlate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const bendingrun_balance: (a: number) => [number, number];
export const bendingrun_deflection: (a: number) => [number, number];
export const bendingrun_dissipation: (a: number) => [number, number];
export const bendingrun_elastic: (a: number) => [number, number];
export const bendingrun_n: (a: number) => number;
export const bendingrun_plastic: (a: number) => [number, number];
export const bendingrun_t: (a: number) => [number, number];
export const bendingrun_work: (a: number) => [number, number];
export const cyclicCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const dissipationBound: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
