// Inline icon glyphs. Every operation-bearing control pairs one of these
// with a visible or aria label, so nothing is a bare unlabeled widget.

const svg = (body: string): string =>
    `<svg class="icon" viewBox="0 0 16 16" width="14" height="14" ` +
    `aria-hidden="true" focusable="false">${body}</svg>`;

export const icons = {
    arrow: svg('<path d="M2 8h9M8 4l4 4-4 4" stroke="currentColor" stroke-width="2" fill="none"/>'),
    enlarge: svg('<path d="M3 9v4h4M13 7V3H9M3 13l4.5-4.5M13 3 8.5 7.5" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    restore: svg('<path d="M7 13V9H3M9 3v4h4M3 3l4 4M13 13 9 9" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    marker: svg('<path d="M3 2h10v9H8l-3 3v-3H3z" stroke="currentColor" stroke-width="1.4" fill="none"/>'),
    reference: svg('<path d="M6 3h7v7M13 3 6.5 9.5M7 13H3V9" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    reply: svg('<path d="M6 3 2 7l4 4M2 7h7a5 5 0 0 1 5 5v1" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    ballot: svg('<path d="M3 8l3 3 7-7" stroke="currentColor" stroke-width="2" fill="none"/><rect x="1.5" y="3" width="13" height="11" rx="1" stroke="currentColor" fill="none"/>'),
    join: svg('<circle cx="6" cy="5.5" r="2.5" stroke="currentColor" fill="none"/><path d="M1.5 14a4.5 4.5 0 0 1 9 0M12 5v5M9.5 7.5h5" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    user: svg('<circle cx="8" cy="5.5" r="2.5" stroke="currentColor" fill="none"/><path d="M3 14a5 5 0 0 1 10 0" stroke="currentColor" stroke-width="1.6" fill="none"/>'),
    send: svg('<path d="M2 8l12-6-4 12-2.5-4.5z" stroke="currentColor" stroke-width="1.4" fill="none"/>'),
    document: svg('<path d="M4 1.5h6l3 3V14.5H4z" stroke="currentColor" fill="none"/><path d="M6 8h5M6 10.5h5" stroke="currentColor"/>'),
    area: svg('<rect x="2" y="2" width="12" height="12" rx="1.5" stroke="currentColor" fill="none"/><path d="M2 6h12M8 6v8" stroke="currentColor"/>'),
};

export type IconName = keyof typeof icons;

export function iconButton(
    icon: IconName,
    label: string,
    className: string,
): HTMLButtonElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = className;
    button.setAttribute("aria-label", label);
    button.title = label;
    button.innerHTML = icons[icon] + `<span class="button-label">${escapeHtml(label)}</span>`;
    return button;
}

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
