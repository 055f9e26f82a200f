/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const geometric_histogram: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const two_branch_trajectory: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const walk_density: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
