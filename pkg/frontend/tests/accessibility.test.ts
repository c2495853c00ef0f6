// Every operation-bearing control carries a label and an icon affordance:
// crawl the rendered UI and assert non-empty accessible names throughout,
// and an icon inside every action button.

import { beforeEach, describe, expect, it } from "vitest";

import { renderBallotForm } from "../src/ballot";
import { renderHomepage } from "../src/homepage";
import { MeetingAreaViewer } from "../src/viewer";
import { FakeApi } from "./fakeapi";

function accessibleName(element: HTMLElement): string {
    const name =
        element.getAttribute("aria-label") ||
        element.closest("label")?.textContent ||
        element.textContent ||
        (element as HTMLInputElement).placeholder ||
        "";
    return name.trim();
}

function auditControls(scope: HTMLElement): void {
    const controls = scope.querySelectorAll<HTMLElement>(
        "button, a, input, textarea, select",
    );
    expect(controls.length).toBeGreaterThan(0);
    for (const control of controls) {
        expect(
            accessibleName(control),
            `unlabeled <${control.tagName.toLowerCase()} class="${control.className}">`,
        ).not.toBe("");
    }
}

beforeEach(() => {
    document.body.innerHTML = "";
});

describe("labels and affordances", () => {
    it("the meeting-area viewer is fully labeled and buttons carry icons", async () => {
        const viewer = new MeetingAreaViewer(new FakeApi(), document.body);
        await viewer.open("a1");
        await viewer.handleReferenceClick("c1");
        auditControls(document.body);
        for (const button of document.querySelectorAll<HTMLElement>(
            ".enlarge-button, .item-reference, .comment-reference, .reply-button",
        )) {
            expect(
                button.querySelector("svg.icon"),
                `icon missing in .${button.className}`,
            ).toBeTruthy();
        }
    });

    it("the homepage is fully labeled", () => {
        renderHomepage(document.body, new FakeApi().world.homepage, {
            openArea: () => undefined,
            join: () => undefined,
            openProfile: () => undefined,
        });
        auditControls(document.body);
        expect(document.querySelector(".profile-link svg.icon")).toBeTruthy();
    });

    it("ballot forms are fully labeled with an icon on the cast button", () => {
        const api = new FakeApi();
        renderBallotForm(document.body, api.world.poll, api, () => undefined);
        auditControls(document.body);
        expect(document.querySelector(".cast-ballot svg.icon")).toBeTruthy();
    });
});
