// Highlight styling derives purely from the server's activation state;
// the UI holds no activation truth of its own.

import type { ActivationStateView } from "./types";

export interface HighlightState {
    // comment whose item reference gets green shading and the arrow glyph
    greenReference: string | null;
    // comment whose subject line is yellow in both index and reader
    yellowSubject: string | null;
    // in-text comment reference highlighted yellow inside the document
    yellowAnchor: string | null;
    // item shown in the folio viewer
    displayedItem: string | null;
}

export const EMPTY_ACTIVATION: ActivationStateView = {
    active_comment: null,
    active_reference: null,
    displayed_item: null,
    highlighted_anchor: null,
};

export function deriveHighlights(state: ActivationStateView): HighlightState {
    return {
        greenReference: state.active_reference,
        yellowSubject: state.active_comment,
        yellowAnchor: state.highlighted_anchor,
        displayedItem: state.displayed_item,
    };
}

export function sameActivation(
    a: ActivationStateView,
    b: ActivationStateView,
): boolean {
    return (
        a.active_comment === b.active_comment &&
        a.active_reference === b.active_reference &&
        a.displayed_item === b.displayed_item &&
        a.highlighted_anchor === b.highlighted_anchor
    );
}
