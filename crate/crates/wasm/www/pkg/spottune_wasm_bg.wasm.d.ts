/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const explore_billing: (a: number, b: number, c: number, d: number) => [number, number];
export const explore_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const sweep_theta: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
