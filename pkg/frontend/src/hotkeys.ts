/**
 * Keyboard-only labeling path: digits pick a class, "f" finalizes.
 */

export type HotkeyAction = { type: 'label'; label: number } | { type: 'finalize' };

export interface HotkeyContext {
  numClasses: number;
  canFinalize: boolean;
}

/** Map a key press to an action, or null when the key is not bound. */
export function keyToAction(key: string, ctx: HotkeyContext): HotkeyAction | null {
  if ((key === 'f' || key === 'F') && ctx.canFinalize) {
    return { type: 'finalize' };
  }
  if (key.length === 1 && key >= '1' && key <= '9') {
    const label = Number(key) - 1; // key 1 -> class 0
    if (label < ctx.numClasses) {
      return { type: 'label', label };
    }
  }
  return null;
}

function isTypingTarget(target: EventTarget | null): boolean {
  const tag = (target as { tagName?: string } | null)?.tagName;
  return tag === 'INPUT' || tag === 'TEXTAREA' || tag === 'SELECT';
}

export function attachHotkeys(
  getContext: () => HotkeyContext | null,
  dispatch: (action: HotkeyAction) => void,
  target: Pick<Window, 'addEventListener' | 'removeEventListener'> = window,
): () => void {
  const handler = (event: Event) => {
    const key = (event as KeyboardEvent).key;
    if (isTypingTarget(event.target)) return;
    const ctx = getContext();
    if (!ctx) return;
    const action = keyToAction(key, ctx);
    if (action) {
      event.preventDefault();
      dispatch(action);
    }
  };
  target.addEventListener('keydown', handler);
  return () => target.removeEventListener('keydown', handler);
}
