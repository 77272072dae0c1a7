// minimal typings for the two codec packages (no bundled or mirror types)
declare module 'pngjs' {
  export class PNG {
    constructor(options?: { width?: number; height?: number });
    width: number;
    height: number;
    data: Buffer;
    static sync: {
      read(buffer: Buffer): PNG;
      write(png: PNG): Buffer;
    };
  }
}

declare module 'jpeg-js' {
  export interface RawImageData {
    width: number;
    height: number;
    data: Uint8Array;
  }
  export function decode(
    buffer: Buffer,
    options?: { useTArray?: boolean },
  ): RawImageData;
  export function encode(image: RawImageData, quality?: number): { data: Uint8Array };
  const jpeg: { decode: typeof decode; encode: typeof encode };
  export default jpeg;
}
