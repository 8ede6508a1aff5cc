/** Tiny --flag value / --flag parser for the conversion scripts. */

export function parseArgs(argv: string[], flags: Record<string, 'value' | 'bool'>):
    Record<string, string | boolean> {
  const out: Record<string, string | boolean> = {};
  for (let i = 0; i < argv.length; i++) {
    const token = argv[i];
    if (!token.startsWith('--')) {
      throw new Error(`unexpected argument ${token}`);
    }
    const name = token.slice(2);
    const kind = flags[name];
    if (!kind) {
      throw new Error(`unknown flag --${name}`);
    }
    if (kind === 'bool') {
      out[name] = true;
    } else {
      const value = argv[++i];
      if (value === undefined) {
        throw new Error(`flag --${name} needs a value`);
      }
      out[name] = value;
    }
  }
  return out;
}
