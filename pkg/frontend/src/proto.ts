// Minimal protobuf wire-format writer, just enough to serialize the ONNX
// model messages used by the export tool. Wire types: 0 varint, 2
// length-delimited, 5 fixed32.

export class ProtoWriter {
  private chunks: Buffer[] = [];

  private push(buf: Buffer): void {
    this.chunks.push(buf);
  }

  static varintBytes(value: number | bigint): Buffer {
    let v = BigInt(value);
    if (v < 0n) v += 1n << 64n; // two's complement for negative int64
    const bytes: number[] = [];
    do {
      let b = Number(v & 0x7fn);
      v >>= 7n;
      if (v !== 0n) b |= 0x80;
      bytes.push(b);
    } while (v !== 0n);
    return Buffer.from(bytes);
  }

  private tag(field: number, wire: number): void {
    this.push(ProtoWriter.varintBytes((field << 3) | wire));
  }

  varint(field: number, value: number | bigint): this {
    this.tag(field, 0);
    this.push(ProtoWriter.varintBytes(value));
    return this;
  }

  float(field: number, value: number): this {
    this.tag(field, 5);
    const buf = Buffer.alloc(4);
    buf.writeFloatLE(value, 0);
    this.push(buf);
    return this;
  }

  bytes(field: number, value: Buffer | Uint8Array): this {
    this.tag(field, 2);
    this.push(ProtoWriter.varintBytes(value.length));
    this.push(Buffer.from(value));
    return this;
  }

  string(field: number, value: string): this {
    return this.bytes(field, Buffer.from(value, 'utf8'));
  }

  message(field: number, inner: ProtoWriter): this {
    return this.bytes(field, inner.finish());
  }

  finish(): Buffer {
    return Buffer.concat(this.chunks);
  }
}
