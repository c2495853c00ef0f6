// Keyboard navigation through the comments index: next/previous comment
// without touching the mouse. Skipped while the focus is in a text field.

import type { MeetingAreaViewer } from "./viewer";

export function attachKeyboardNavigation(
    viewer: MeetingAreaViewer,
    target: Document | HTMLElement = document,
): () => void {
    const handler = (event: Event) => {
        const key = (event as KeyboardEvent).key;
        const element = event.target as HTMLElement | null;
        const tag = element?.tagName?.toLowerCase();
        if (tag === "input" || tag === "textarea" || tag === "select") return;
        if (key === "ArrowDown" || key === "j") {
            event.preventDefault();
            void viewer.selectAdjacent(1);
        } else if (key === "ArrowUp" || key === "k") {
            event.preventDefault();
            void viewer.selectAdjacent(-1);
        }
    };
    target.addEventListener("keydown", handler);
    return () => target.removeEventListener("keydown", handler);
}
