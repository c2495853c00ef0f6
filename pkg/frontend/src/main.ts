// Application shell: hash routing between the group list, group
// homepages, and meeting-area viewers, plus a minimal login box.

import { ApiError, HttpApi } from "./api";
import { renderHomepage } from "./homepage";
import { attachKeyboardNavigation } from "./keyboard";
import { MeetingAreaViewer } from "./viewer";
import { escapeHtml, iconButton } from "./icons";

const api = new HttpApi("", localStorage.getItem("convene-token"));
let detachKeyboard: (() => void) | null = null;

function appRoot(): HTMLElement {
    return document.getElementById("app")!;
}

function setRoute(): void {
    void route(location.hash);
}

async function route(hash: string): Promise<void> {
    detachKeyboard?.();
    detachKeyboard = null;
    const root = appRoot();
    root.textContent = "";
    try {
        if (hash.startsWith("#/area/")) {
            const viewer = new MeetingAreaViewer(api, root);
            await viewer.open(hash.slice("#/area/".length));
            detachKeyboard = attachKeyboardNavigation(viewer);
        } else if (hash.startsWith("#/group/")) {
            const groupId = hash.slice("#/group/".length);
            const view = await api.getHomepage(groupId);
            renderHomepage(root, view, {
                openArea: (areaId) => (location.hash = `#/area/${areaId}`),
                join: () =>
                    void api
                        .joinGroup(groupId)
                        .then(() => route(hash))
                        .catch(showError),
                openProfile: () => (location.hash = "#/profile"),
            });
        } else if (hash === "#/profile") {
            renderProfile(root);
        } else {
            await renderGroupList(root);
        }
    } catch (error) {
        showError(error);
    }
}

async function renderGroupList(root: HTMLElement): Promise<void> {
    const groups = await api.listGroups();
    const page = document.createElement("div");
    page.className = "group-list-page";
    page.innerHTML = "<h1>Group spaces</h1>";
    const list = document.createElement("ul");
    list.className = "group-list";
    for (const group of groups) {
        const entry = document.createElement("li");
        const link = document.createElement("a");
        link.href = `#/group/${group.id}`;
        link.textContent = `${group.name} — ${group.description}`;
        entry.appendChild(link);
        list.appendChild(entry);
    }
    page.appendChild(list);
    page.appendChild(loginBox());
    root.appendChild(page);
}

function renderProfile(root: HTMLElement): void {
    const page = document.createElement("div");
    page.className = "profile-page";
    page.innerHTML = "<h1>Your profile</h1>";
    const logout = iconButton("user", "Sign out", "logout-button");
    logout.addEventListener("click", () => {
        localStorage.removeItem("convene-token");
        api.setToken(null);
        location.hash = "#/";
    });
    page.appendChild(logout);
    root.appendChild(page);
}

function loginBox(): HTMLElement {
    const box = document.createElement("form");
    box.className = "login-box";
    box.setAttribute("aria-label", "Sign in");
    box.innerHTML =
        '<input name="email" type="email" placeholder="email" aria-label="Email" required>' +
        '<input name="password" type="password" placeholder="password" aria-label="Password" required>';
    const submit = iconButton("user", "Sign in", "login-button");
    submit.type = "submit";
    box.appendChild(submit);
    box.addEventListener("submit", (event) => {
        event.preventDefault();
        const data = new FormData(box);
        void api
            .login(String(data.get("email")), String(data.get("password")))
            .then((token) => {
                localStorage.setItem("convene-token", token);
                setRoute();
            })
            .catch(showError);
    });
    return box;
}

function showError(error: unknown): void {
    const root = appRoot();
    const panel = document.createElement("div");
    panel.className = "error-panel";
    panel.setAttribute("role", "alert");
    const message =
        error instanceof ApiError
            ? `${error.errorName}: ${error.message}`
            : String(error);
    panel.innerHTML = `<p>${escapeHtml(message)}</p>`;
    const retry = iconButton("restore", "Retry", "retry-button");
    retry.addEventListener("click", setRoute);
    panel.appendChild(retry);
    root.prepend(panel);
}

window.addEventListener("hashchange", setRoute);
window.addEventListener("DOMContentLoaded", setRoute);
