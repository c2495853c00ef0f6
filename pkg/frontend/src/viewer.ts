// The meeting-area viewer. Items live in the folio viewer on the left;
// comment headers fill the index, the active comment fills the reader.
// Clicking a header's item reference activates both the reference (green
// shading + arrow) and its comment, and loads the referenced item into
// the folio viewer with any in-text reference highlighted yellow.
// Clicking a subject line activates just the comment: the active item
// reference stays put.

import { ApiError, type Api } from "./api";
import {
    deriveHighlights,
    EMPTY_ACTIVATION,
    sameActivation,
    type HighlightState,
} from "./activation";
import { renderBallotForm } from "./ballot";
import { renderAnnotated, scrollMarkerIntoView } from "./document";
import { escapeHtml, iconButton, icons } from "./icons";
import { ViewerLayout } from "./layout";
import type {
    ActivationStateView,
    AreaView,
    CommentHeaderView,
    ItemView,
} from "./types";

export class MeetingAreaViewer {
    readonly layout: ViewerLayout;
    private activation: ActivationStateView = { ...EMPTY_ACTIVATION };
    private headers: CommentHeaderView[] = [];
    private area: AreaView | null = null;
    // bumped on every folio display load; lets tests pin "no flicker"
    folioRenderCount = 0;

    constructor(
        private api: Api,
        container: HTMLElement,
    ) {
        this.layout = new ViewerLayout(container);
    }

    get activationState(): ActivationStateView {
        return { ...this.activation };
    }

    async open(areaId: string): Promise<void> {
        this.area = await this.api.getArea(areaId);
        this.layout.banner.innerHTML =
            `<span class="banner-group">${escapeHtml(this.area.group_name)}</span>` +
            ` / <span class="banner-area">${escapeHtml(this.area.title)}</span>` +
            `<span class="banner-description">${escapeHtml(this.area.description)}</span>`;
        await this.refreshIndex();
        this.renderFolioPlaceholder();
        this.renderReaderPlaceholder();
    }

    async refreshIndex(): Promise<void> {
        if (!this.area) return;
        this.headers = await this.api.getComments(this.area.id, "threaded");
        const body = this.layout.body("comments-index");
        body.textContent = "";
        const list = document.createElement("ul");
        list.className = "index-list";
        for (const header of this.headers) {
            const row = document.createElement("li");
            row.className = "index-row";
            row.dataset.commentId = header.comment_id;
            if (header.item_reference) {
                const reference = document.createElement("button");
                reference.type = "button";
                reference.className = "item-reference";
                reference.dataset.commentId = header.comment_id;
                reference.setAttribute(
                    "aria-label",
                    `Open item reference ${header.item_reference.label}`,
                );
                reference.innerHTML =
                    `<span class="arrow-glyph" hidden>${icons.arrow}</span>` +
                    icons.reference +
                    escapeHtml(header.item_reference.label);
                reference.addEventListener("click", () =>
                    void this.handleReferenceClick(header.comment_id),
                );
                row.appendChild(reference);
            }
            const subject = document.createElement("button");
            subject.type = "button";
            subject.className = "subject-line";
            subject.dataset.commentId = header.comment_id;
            subject.setAttribute(
                "aria-label",
                `Read comment ${header.subject || "(no subject)"}`,
            );
            subject.textContent = header.subject || "(no subject)";
            subject.addEventListener("click", () =>
                void this.handleSubjectClick(header.comment_id),
            );
            const byline = document.createElement("span");
            byline.className = "byline";
            byline.textContent = header.author_name;
            row.appendChild(subject);
            row.appendChild(byline);
            list.appendChild(row);
        }
        body.appendChild(list);
        this.applyHighlights();
    }

    async handleReferenceClick(commentId: string): Promise<void> {
        let state: ActivationStateView;
        try {
            state = await this.api.activate("reference", commentId, this.activation);
        } catch (error) {
            this.handleStale(error);
            return;
        }
        if (sameActivation(state, this.activation)) {
            this.applyHighlights();
            return; // already active: no reload, no flicker
        }
        const itemChanged =
            state.displayed_item !== this.activation.displayed_item ||
            state.highlighted_anchor !== this.activation.highlighted_anchor;
        this.activation = state;
        if (itemChanged && state.displayed_item) {
            await this.loadFolioDisplay(state.displayed_item);
        }
        await this.renderReader(state.active_comment);
        this.applyHighlights();
        scrollMarkerIntoView(this.layout.body("folio-viewer"));
    }

    async handleSubjectClick(commentId: string): Promise<void> {
        let state: ActivationStateView;
        try {
            state = await this.api.activate("subject", commentId, this.activation);
        } catch (error) {
            this.handleStale(error);
            return;
        }
        if (sameActivation(state, this.activation)) {
            this.applyHighlights();
            return;
        }
        this.activation = state; // folio viewer untouched by design
        await this.renderReader(state.active_comment);
        this.applyHighlights();
    }

    // A clicked comment the server no longer recognizes means the index
    // is stale: offer a refresh instead of failing silently.
    private handleStale(error: unknown): void {
        if (!(error instanceof ApiError) || error.status !== 404) throw error;
        const body = this.layout.body("comments-index");
        if (body.querySelector(".stale-notice")) return;
        const notice = document.createElement("div");
        notice.className = "stale-notice";
        notice.setAttribute("role", "alert");
        const message = document.createElement("span");
        message.textContent = "That comment is gone from this view. ";
        const refresh = iconButton("restore", "Refresh the index", "refresh-index");
        refresh.addEventListener("click", () => void this.refreshIndex());
        notice.append(message, refresh);
        body.prepend(notice);
    }

    // -- keyboard navigation through the comments index --

    async selectAdjacent(step: 1 | -1): Promise<void> {
        if (!this.headers.length) return;
        const current = this.headers.findIndex(
            (h) => h.comment_id === this.activation.active_comment,
        );
        const next =
            current === -1
                ? step === 1
                    ? 0
                    : this.headers.length - 1
                : Math.min(Math.max(current + step, 0), this.headers.length - 1);
        await this.handleSubjectClick(this.headers[next].comment_id);
    }

    // -- rendering --

    private renderFolioPlaceholder(): void {
        const body = this.layout.body("folio-viewer");
        body.textContent = "";
        const hint = document.createElement("p");
        hint.className = "folio-hint";
        hint.textContent =
            "Click an item reference in the comments index to load its item here.";
        body.appendChild(hint);
    }

    private renderReaderPlaceholder(): void {
        const body = this.layout.body("comment-reader");
        body.textContent = "";
        const hint = document.createElement("p");
        hint.className = "reader-hint";
        hint.textContent = "Click a comment header to read it here.";
        body.appendChild(hint);
    }

    private async loadFolioDisplay(itemId: string): Promise<void> {
        const item = await this.api.getItem(itemId);
        const body = this.layout.body("folio-viewer");
        this.folioRenderCount += 1;
        body.textContent = "";
        const display = document.createElement("article");
        display.className = "item-display";
        display.dataset.itemId = item.id;
        const heading = document.createElement("h2");
        heading.className = "item-label";
        heading.textContent = item.label;
        display.appendChild(heading);
        await this.renderItemBody(display, item);
        body.appendChild(display);
    }

    private async renderItemBody(
        display: HTMLElement,
        item: ItemView,
    ): Promise<void> {
        const kind = item.kind;
        if (kind.kind === "document") {
            const doc = await this.api.getDocument(kind.document_id);
            if (!doc.plaintext) {
                const note = document.createElement("p");
                note.textContent = `Uploaded document: ${doc.filename ?? "file"}`;
                display.appendChild(note);
                return;
            }
            const segments = await this.api.getAnnotated(
                kind.document_id,
                this.activation.highlighted_anchor,
            );
            const holder = document.createElement("div");
            holder.className = "annotated-document";
            renderAnnotated(holder, segments, (commentId) =>
                void this.handleReferenceClick(commentId),
            );
            display.appendChild(holder);
        } else if (kind.kind === "link") {
            const anchor = document.createElement("a");
            anchor.href = kind.url;
            anchor.textContent = kind.caption || kind.url;
            anchor.rel = "noopener";
            display.appendChild(anchor);
        } else if (kind.kind === "discussion") {
            const prompt = document.createElement("p");
            prompt.className = "discussion-prompt";
            prompt.textContent = kind.prompt;
            display.appendChild(prompt);
        } else {
            const poll = await this.api.getPoll(kind.poll_id);
            const holder = document.createElement("div");
            holder.className = "poll-display";
            renderBallotForm(holder, poll, this.api, () => undefined);
            display.appendChild(holder);
        }
    }

    private async renderReader(commentId: string | null): Promise<void> {
        if (!commentId) {
            this.renderReaderPlaceholder();
            return;
        }
        const comment = await this.api.getComment(commentId);
        const body = this.layout.body("comment-reader");
        body.textContent = "";
        const article = document.createElement("article");
        article.className = "comment-full";
        article.dataset.commentId = comment.id;
        const head = document.createElement("div");
        head.className = "comment-head";
        if (comment.item_reference) {
            const reference = document.createElement("button");
            reference.type = "button";
            reference.className = "item-reference";
            reference.dataset.commentId = comment.id;
            reference.setAttribute(
                "aria-label",
                `Open item reference ${comment.item_reference.label}`,
            );
            reference.innerHTML =
                `<span class="arrow-glyph" hidden>${icons.arrow}</span>` +
                icons.reference +
                escapeHtml(comment.item_reference.label);
            reference.addEventListener("click", () =>
                void this.handleReferenceClick(comment.id),
            );
            head.appendChild(reference);
        }
        const subject = document.createElement("button");
        subject.type = "button";
        subject.className = "subject-line";
        subject.dataset.commentId = comment.id;
        subject.setAttribute("aria-label", `Comment subject: ${comment.subject}`);
        subject.textContent = comment.subject;
        head.appendChild(subject);
        const byline = document.createElement("p");
        byline.className = "byline";
        byline.textContent = `${comment.author_name} · ${comment.created_at}`;
        const text = document.createElement("p");
        text.className = "comment-body";
        text.textContent = comment.retracted ? "(retracted)" : comment.body;
        article.appendChild(head);
        article.appendChild(byline);
        article.appendChild(text);
        if (this.area?.can_post) {
            const reply = iconButton("reply", "Reply to this comment", "reply-button");
            reply.addEventListener("click", () => this.openReplyForm(comment.id));
            article.appendChild(reply);
        }
        body.appendChild(article);
    }

    private openReplyForm(parentId: string): void {
        const body = this.layout.body("comment-reader");
        if (body.querySelector(".reply-form")) return;
        const form = document.createElement("form");
        form.className = "reply-form";
        form.setAttribute("aria-label", "Reply");
        const subject = document.createElement("input");
        subject.name = "subject";
        subject.placeholder = "Subject (defaults to Re: parent)";
        subject.setAttribute("aria-label", "Reply subject");
        const text = document.createElement("textarea");
        text.name = "body";
        text.required = true;
        text.setAttribute("aria-label", "Reply body");
        const send = iconButton("send", "Post reply", "send-reply");
        send.type = "submit";
        form.append(subject, text, send);
        form.addEventListener("submit", (event) => {
            event.preventDefault();
            void (async () => {
                if (!this.area) return;
                await this.api.postComment(
                    this.area.id,
                    subject.value,
                    text.value,
                    { kind: "reply_to", comment_id: parentId },
                );
                form.remove();
                await this.refreshIndex();
            })();
        });
        body.appendChild(form);
    }

    // -- highlighting --

    applyHighlights(): void {
        const highlights = deriveHighlights(this.activation);
        for (const reference of this.layout.root.querySelectorAll<HTMLElement>(
            ".item-reference",
        )) {
            const active = reference.dataset.commentId === highlights.greenReference;
            reference.classList.toggle("green-highlight", active);
            const arrow = reference.querySelector<HTMLElement>(".arrow-glyph");
            if (arrow) arrow.hidden = !active;
        }
        for (const subject of this.layout.root.querySelectorAll<HTMLElement>(
            ".subject-line",
        )) {
            subject.classList.toggle(
                "yellow-highlight",
                subject.dataset.commentId === highlights.yellowSubject,
            );
        }
        for (const marker of this.layout.root.querySelectorAll<HTMLElement>(
            ".comment-reference",
        )) {
            marker.classList.toggle(
                "yellow-highlight",
                marker.dataset.anchorId === highlights.yellowAnchor,
            );
        }
    }

    // What the DOM actually shows, for snapshot comparison against the
    // pure derivation: the sets must always match exactly.
    collectHighlights(): HighlightState {
        const root = this.layout.root;
        const green = root.querySelector<HTMLElement>(
            ".index-list .item-reference.green-highlight",
        );
        const yellow = root.querySelector<HTMLElement>(
            ".index-list .subject-line.yellow-highlight",
        );
        const anchor = root.querySelector<HTMLElement>(
            ".comment-reference.yellow-highlight",
        );
        const display = root.querySelector<HTMLElement>(".item-display");
        return {
            greenReference: green?.dataset.commentId ?? null,
            yellowSubject: yellow?.dataset.commentId ?? null,
            yellowAnchor: anchor?.dataset.anchorId ?? null,
            displayedItem: display?.dataset.itemId ?? null,
        };
    }
}
