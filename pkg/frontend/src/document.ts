// Annotated document display: the revision text with in-text comment
// reference markers between runs. The active reference renders yellow,
// matching the highlight in the index and reader.

import { icons } from "./icons";
import type { SegmentView } from "./types";

export function renderAnnotated(
    container: HTMLElement,
    segments: SegmentView[],
    onMarkerClick: (commentId: string) => void,
): void {
    container.textContent = "";
    const pre = document.createElement("div");
    pre.className = "document-text";
    for (const segment of segments) {
        if (segment.type === "text") {
            pre.appendChild(document.createTextNode(segment.text));
            continue;
        }
        const marker = document.createElement("button");
        marker.type = "button";
        marker.className = "comment-reference";
        marker.dataset.anchorId = segment.anchor_id;
        if (segment.comment_id) marker.dataset.commentId = segment.comment_id;
        marker.setAttribute("aria-label", "In-text comment reference");
        marker.title = "In-text comment reference";
        marker.innerHTML = icons.marker;
        if (segment.active) marker.classList.add("yellow-highlight");
        if (segment.comment_id) {
            const commentId = segment.comment_id;
            marker.addEventListener("click", () => onMarkerClick(commentId));
        }
        pre.appendChild(marker);
    }
    container.appendChild(pre);
}

export function scrollMarkerIntoView(container: HTMLElement): void {
    const active = container.querySelector<HTMLElement>(
        ".comment-reference.yellow-highlight",
    );
    active?.scrollIntoView?.({ block: "center" });
}
