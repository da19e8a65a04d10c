/** Display formatting for leaderboard and progress values. */

/** 0.375 -> "37.5%"; one decimal, matching the service walkthroughs. */
export function formatPercent(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

/** Labeled accuracy is undefined before the first label. */
export function formatAccuracy(accuracy: number | null): string {
  return accuracy === null ? 'n/a' : formatPercent(accuracy);
}

export function formatProgress(step: number, budget: number): string {
  return `${step} / ${budget} labels`;
}

/** Class choices render 0-based, hotkeys 1-based: "2 [key 3]". */
export function formatClassChoice(label: number): string {
  return `${label} [key ${label + 1}]`;
}

const IMAGE_SUFFIXES = ['.png', '.jpg', '.jpeg', '.gif', '.webp', '.svg'];

/** Display payloads are references: image URLs render as <img>, anything else as text. */
export function isImageReference(display: string): boolean {
  const clean = display.split('?')[0].toLowerCase();
  return IMAGE_SUFFIXES.some((suffix) => clean.endsWith(suffix));
}
