// The meeting-area viewer frame: a banner over three panes (folio viewer
// on the left, comments index above comment reader on the right). Each
// pane carries an enlarge control; enlarging fills the window with that
// pane and restoring brings back the standard view with every pane's
// scroll position exactly as it was.

import { iconButton } from "./icons";

export type PaneId = "folio-viewer" | "comments-index" | "comment-reader";

export const PANE_IDS: PaneId[] = [
    "folio-viewer",
    "comments-index",
    "comment-reader",
];

const PANE_TITLES: Record<PaneId, string> = {
    "folio-viewer": "Folio viewer",
    "comments-index": "Comments index",
    "comment-reader": "Comment reader",
};

interface ScrollPosition {
    top: number;
    left: number;
}

function clampPercent(value: number): number {
    return Math.min(Math.max(value, 15), 85);
}

export class ViewerLayout {
    readonly root: HTMLElement;
    readonly banner: HTMLElement;
    private grid!: HTMLElement;
    private bodies = new Map<PaneId, HTMLElement>();
    private panes = new Map<PaneId, HTMLElement>();
    private savedScroll: Map<PaneId, ScrollPosition> | null = null;
    enlarged: PaneId | null = null;

    constructor(container: HTMLElement) {
        this.root = document.createElement("div");
        this.root.className = "meeting-area";
        this.banner = document.createElement("header");
        this.banner.className = "area-banner";
        this.root.appendChild(this.banner);
        const grid = document.createElement("div");
        grid.className = "pane-grid";
        this.root.appendChild(grid);
        this.grid = grid;
        for (const paneId of PANE_IDS) {
            const pane = document.createElement("section");
            pane.className = "pane";
            pane.dataset.pane = paneId;
            pane.setAttribute("aria-label", PANE_TITLES[paneId]);
            const head = document.createElement("div");
            head.className = "pane-head";
            const title = document.createElement("span");
            title.className = "pane-title";
            title.textContent = PANE_TITLES[paneId];
            head.appendChild(title);
            const enlarge = iconButton(
                "enlarge",
                `Enlarge ${PANE_TITLES[paneId].toLowerCase()}`,
                "enlarge-button",
            );
            enlarge.addEventListener("click", () => this.toggle(paneId));
            head.appendChild(enlarge);
            pane.appendChild(head);
            const body = document.createElement("div");
            body.className = "pane-body";
            pane.appendChild(body);
            grid.appendChild(pane);
            this.panes.set(paneId, pane);
            this.bodies.set(paneId, body);
        }
        this.attachSplitters();
        container.appendChild(this.root);
    }

    // Pane proportions default to 50/25/25 and adjust by dragging the
    // separators between panes.
    private attachSplitters(): void {
        const vertical = this.makeSplitter(
            "vertical",
            "Resize the folio viewer",
            (fraction) =>
                this.grid.style.setProperty(
                    "--left-width",
                    `${clampPercent(fraction * 100)}%`,
                ),
        );
        const horizontal = this.makeSplitter(
            "horizontal",
            "Resize the comments index",
            (fraction) =>
                this.grid.style.setProperty(
                    "--index-height",
                    `${clampPercent(fraction * 100)}%`,
                ),
        );
        this.grid.appendChild(vertical);
        this.grid.appendChild(horizontal);
    }

    private makeSplitter(
        direction: "vertical" | "horizontal",
        label: string,
        apply: (fraction: number) => void,
    ): HTMLElement {
        const splitter = document.createElement("div");
        splitter.className = `splitter splitter-${direction}`;
        splitter.setAttribute("role", "separator");
        splitter.setAttribute("aria-label", label);
        splitter.setAttribute(
            "aria-orientation",
            direction === "vertical" ? "vertical" : "horizontal",
        );
        const onMove = (event: Event) => {
            const pointer = event as MouseEvent;
            const rect = this.grid.getBoundingClientRect();
            // rect extents are zero in layout-less test environments;
            // treat the grid as a 1000px square there
            const fraction =
                direction === "vertical"
                    ? (pointer.clientX - rect.left) / (rect.width || 1000)
                    : (pointer.clientY - rect.top) / (rect.height || 1000);
            apply(fraction);
        };
        const stop = () => {
            document.removeEventListener("pointermove", onMove);
            document.removeEventListener("pointerup", stop);
        };
        splitter.addEventListener("pointerdown", (event) => {
            event.preventDefault();
            document.addEventListener("pointermove", onMove);
            document.addEventListener("pointerup", stop);
        });
        return splitter;
    }

    body(paneId: PaneId): HTMLElement {
        return this.bodies.get(paneId)!;
    }

    pane(paneId: PaneId): HTMLElement {
        return this.panes.get(paneId)!;
    }

    toggle(paneId: PaneId): void {
        if (this.enlarged === paneId) {
            this.restore();
        } else {
            this.enlarge(paneId);
        }
    }

    enlarge(paneId: PaneId): void {
        if (this.enlarged === paneId) return;
        if (this.enlarged !== null) {
            // never two enlarged panes: drop back to standard view first
            this.restore();
        }
        this.savedScroll = new Map(
            PANE_IDS.map((id) => {
                const body = this.bodies.get(id)!;
                return [id, { top: body.scrollTop, left: body.scrollLeft }];
            }),
        );
        this.enlarged = paneId;
        this.root.classList.add("has-enlarged");
        this.panes.get(paneId)!.classList.add("enlarged");
        this.swapEnlargeIcons(paneId);
    }

    restore(): void {
        if (this.enlarged === null) return;
        this.panes.get(this.enlarged)!.classList.remove("enlarged");
        this.root.classList.remove("has-enlarged");
        this.enlarged = null;
        if (this.savedScroll) {
            for (const [paneId, position] of this.savedScroll) {
                const body = this.bodies.get(paneId)!;
                body.scrollTop = position.top;
                body.scrollLeft = position.left;
            }
            this.savedScroll = null;
        }
        this.swapEnlargeIcons(null);
    }

    private swapEnlargeIcons(enlargedPane: PaneId | null): void {
        for (const paneId of PANE_IDS) {
            const button = this.panes
                .get(paneId)!
                .querySelector<HTMLButtonElement>(".enlarge-button")!;
            const name = PANE_TITLES[paneId].toLowerCase();
            const label =
                paneId === enlargedPane
                    ? `Restore the standard view`
                    : `Enlarge ${name}`;
            button.setAttribute("aria-label", label);
            button.title = label;
            const text = button.querySelector(".button-label");
            if (text) text.textContent = label;
        }
    }
}
