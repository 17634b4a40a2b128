/**
 * Token tables shared by contract with the core engine.
 *
 * The alphabet is fixed: no vocabulary files. Source lines render integer
 * sequences as reversed digits with '%' term boundaries and '-' signs;
 * target lines are program token strings over the operator letters plus
 * the macro glyphs.
 */

export const SOURCE_TOKENS = [
  "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "-", "%",
] as const;

export const TARGET_TOKENS = [
  // the 14 operators
  "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N",
  // local macro names and their separator
  "O", "P", "Q", "R", "S", "T", "U", "V", "W", "X", "|",
  // global macro references: digits and terminator
  "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "#",
] as const;

export const PAD = 0;
export const SOS = 1;
export const EOS = 2;
const SPECIALS = 3;

export interface Vocab {
  readonly size: number;
  toId(token: string): number;
  toToken(id: number): string | null;
}

function makeVocab(tokens: readonly string[]): Vocab {
  const ids = new Map<string, number>();
  tokens.forEach((t, i) => ids.set(t, i + SPECIALS));
  return {
    size: tokens.length + SPECIALS,
    toId(token: string): number {
      const id = ids.get(token);
      if (id === undefined) throw new Error(`token ${JSON.stringify(token)} not in alphabet`);
      return id;
    },
    toToken(id: number): string | null {
      if (id < SPECIALS) return null;
      return tokens[id - SPECIALS] ?? null;
    },
  };
}

export const sourceVocab = makeVocab(SOURCE_TOKENS);
export const targetVocab = makeVocab(TARGET_TOKENS);

export function encodeSource(line: string, maxLen: number): number[] {
  const toks = line.trim().split(/\s+/).filter((t) => t.length > 0);
  return toks.slice(0, maxLen).map((t) => sourceVocab.toId(t));
}

export function encodeTarget(line: string, maxLen: number): number[] {
  const toks = line.trim().split(/\s+/).filter((t) => t.length > 0);
  return toks.slice(0, maxLen).map((t) => targetVocab.toId(t));
}

export function decodeTarget(ids: number[]): string {
  const out: string[] = [];
  for (const id of ids) {
    const tok = targetVocab.toToken(id);
    if (tok !== null) out.push(tok);
  }
  return out.join(" ");
}

/** Well-formedness of an emitted candidate line: ANUM<TAB>TOKENS. */
export function candidateLineOk(line: string): boolean {
  const parts = line.split("\t");
  if (parts.length !== 2) return false;
  if (!/^A\d{6}$/.test(parts[0])) return false;
  const toks = parts[1].split(" ");
  if (toks.length === 0 || parts[1].trim() !== parts[1]) return false;
  return toks.every((t) => (TARGET_TOKENS as readonly string[]).includes(t));
}
