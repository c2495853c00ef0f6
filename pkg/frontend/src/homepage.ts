// The group homepage: name and introduction up top, the viewer's own
// identity (profile link) or a join link, then the meeting-area lists.

import { escapeHtml, iconButton, icons } from "./icons";
import type { HomepageView } from "./types";

export interface HomepageHandlers {
    openArea: (areaId: string) => void;
    join: () => void;
    openProfile: () => void;
}

export function renderHomepage(
    container: HTMLElement,
    view: HomepageView,
    handlers: HomepageHandlers,
): void {
    container.textContent = "";
    const page = document.createElement("div");
    page.className = "group-homepage";

    const header = document.createElement("header");
    header.className = "group-header";
    header.innerHTML =
        `<h1 class="group-name">${escapeHtml(view.name)}</h1>` +
        `<p class="group-description">${escapeHtml(view.description)}</p>`;
    const identity = document.createElement("div");
    identity.className = "identity-line";
    if (view.viewer_is_member) {
        const profile = iconButton("user", "Your member profile", "profile-link");
        profile.addEventListener("click", handlers.openProfile);
        identity.appendChild(profile);
    } else if (view.show_join_link) {
        const join = iconButton(
            "join",
            view.join_policy === "open_join"
                ? "Join this group"
                : "Request to join this group",
            "join-link",
        );
        join.addEventListener("click", handlers.join);
        identity.appendChild(join);
    }
    header.appendChild(identity);
    page.appendChild(header);

    const areaList = (
        title: string,
        areas: { id: string; title: string }[],
        className: string,
    ) => {
        if (!areas.length) return;
        const section = document.createElement("section");
        section.className = className;
        const heading = document.createElement("h2");
        heading.textContent = title;
        section.appendChild(heading);
        const list = document.createElement("ul");
        list.className = "area-list";
        for (const area of areas) {
            const entry = document.createElement("li");
            const link = document.createElement("button");
            link.type = "button";
            link.className = "area-link";
            link.dataset.areaId = area.id;
            link.setAttribute("aria-label", `Open meeting area ${area.title}`);
            link.innerHTML = icons.area + " " + escapeHtml(area.title);
            link.addEventListener("click", () => handlers.openArea(area.id));
            entry.appendChild(link);
            list.appendChild(entry);
        }
        section.appendChild(list);
        page.appendChild(section);
    };
    areaList("Meeting areas", view.areas, "own-areas");
    areaList("Linked meeting areas", view.linked_areas, "linked-areas");
    container.appendChild(page);
}
