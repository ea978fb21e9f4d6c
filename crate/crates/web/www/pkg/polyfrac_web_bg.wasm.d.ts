/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_recovery_free: (a: number, b: number) => void;
export const forward_solve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const fractional_laplacian: (a: number, b: number, c: number) => [number, number, number, number];
export const nodes: (a: number) => [number, number, number, number];
export const recover_potential: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const recovery_coverage: (a: number) => number;
export const recovery_estimate: (a: number) => [number, number];
export const recovery_rel_error: (a: number) => number;
export const recovery_truth: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
