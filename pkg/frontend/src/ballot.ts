// Ballot forms: one control set per procedure, pre-filled with the
// viewer's current ballot so a recast starts from what they last said.
// Submission errors (a passed deadline, a just-closed poll) surface
// inline without wiping the entered choices.

import type { Api } from "./api";
import { ApiError } from "./api";
import { escapeHtml, iconButton, icons } from "./icons";
import type { BallotContentView, PollView } from "./types";

const MAJORITY_CHOICES = ["yes", "no", "abstain"] as const;
const CONSENT_STANCES = [
    ["agree", "Agree"],
    ["stand_aside", "Stand aside"],
    ["block", "Block"],
] as const;

function radio(
    name: string,
    value: string,
    label: string,
    checked: boolean,
): HTMLLabelElement {
    const wrap = document.createElement("label");
    wrap.className = "choice";
    const input = document.createElement("input");
    input.type = "radio";
    input.name = name;
    input.value = value;
    input.checked = checked;
    wrap.appendChild(input);
    wrap.appendChild(document.createTextNode(" " + label));
    return wrap;
}

function checkbox(
    name: string,
    value: string,
    label: string,
    checked: boolean,
): HTMLLabelElement {
    const wrap = document.createElement("label");
    wrap.className = "choice";
    const input = document.createElement("input");
    input.type = "checkbox";
    input.name = name;
    input.value = value;
    input.checked = checked;
    wrap.appendChild(input);
    wrap.appendChild(document.createTextNode(" " + label));
    return wrap;
}

function outcomeText(poll: PollView): string {
    const outcome = poll.outcome;
    if (!outcome) return "open";
    if (outcome.status === "winner" && outcome.winner !== null) {
        return `winner: ${poll.options[outcome.winner]}`;
    }
    if (outcome.status === "tied" && outcome.tied) {
        return `tied: ${outcome.tied.map((k) => poll.options[k]).join(", ")}`;
    }
    return outcome.status.replace(/_/g, " ");
}

function tallyLine(poll: PollView): string {
    const counts = Object.entries(poll.tally.counts)
        .map(([key, count]) => `${key} ${count}`)
        .join(" · ");
    return (
        `${counts} — ${poll.tally.participation} of ${poll.tally.eligible_count}` +
        ` eligible${poll.tally.quorum_met ? "" : " (quorum not met)"}`
    );
}

function readBallot(poll: PollView, form: HTMLFormElement): BallotContentView | null {
    const data = new FormData(form);
    if (poll.procedure === "majority") {
        const choice = data.get("choice");
        if (!choice) return null;
        return { kind: "yes_no_abstain", choice: choice as "yes" | "no" | "abstain" };
    }
    if (poll.procedure === "plurality") {
        const option = data.get("option");
        if (option === null) return null;
        return { kind: "single_choice", option: Number(option) };
    }
    if (poll.procedure === "approval") {
        const options = data.getAll("approve").map(Number);
        return { kind: "approval_set", options };
    }
    const stance = data.get("stance");
    if (!stance) return null;
    const reason = (data.get("reason") as string) || null;
    return {
        kind: "consent",
        stance: stance as "agree" | "stand_aside" | "block",
        reason,
    };
}

export function renderBallotForm(
    container: HTMLElement,
    poll: PollView,
    api: Api,
    onTallyChange: (poll: PollView) => void,
): HTMLFormElement {
    container.textContent = "";
    const mine = poll.my_ballot;

    const heading = document.createElement("h3");
    heading.className = "poll-question";
    heading.innerHTML =
        icons.ballot +
        ` ${escapeHtml(poll.question)} <span class="poll-procedure">(` +
        `${poll.binding ? "decision" : "poll"} · ${poll.procedure})</span>`;
    container.appendChild(heading);

    if (poll.closed) {
        const banner = document.createElement("div");
        banner.className = "outcome-banner";
        banner.setAttribute("role", "status");
        banner.textContent = `Outcome: ${outcomeText(poll)} — ${tallyLine(poll)}`;
        container.appendChild(banner);
    }

    const form = document.createElement("form");
    form.className = "ballot-form";
    form.setAttribute("aria-label", `Ballot: ${poll.question}`);
    const fields = document.createElement("fieldset");
    fields.disabled = poll.closed || !poll.eligible;
    form.appendChild(fields);

    if (poll.procedure === "majority") {
        const current = mine?.kind === "yes_no_abstain" ? mine.choice : null;
        for (const choice of MAJORITY_CHOICES) {
            fields.appendChild(radio("choice", choice, choice, current === choice));
        }
    } else if (poll.procedure === "plurality") {
        const current = mine?.kind === "single_choice" ? mine.option : null;
        poll.options.forEach((label, index) => {
            fields.appendChild(
                radio("option", String(index), label, current === index),
            );
        });
    } else if (poll.procedure === "approval") {
        const current = mine?.kind === "approval_set" ? new Set(mine.options) : new Set<number>();
        poll.options.forEach((label, index) => {
            fields.appendChild(
                checkbox("approve", String(index), label, current.has(index)),
            );
        });
    } else {
        const current = mine?.kind === "consent" ? mine.stance : null;
        for (const [value, label] of CONSENT_STANCES) {
            fields.appendChild(radio("stance", value, label, current === value));
        }
        const reason = document.createElement("input");
        reason.type = "text";
        reason.name = "reason";
        reason.placeholder = "Reason (optional)";
        reason.setAttribute("aria-label", "Reason for your stance (optional)");
        if (mine?.kind === "consent" && mine.reason) reason.value = mine.reason;
        fields.appendChild(reason);
    }

    const submit = iconButton(
        "send",
        mine ? "Recast ballot" : "Cast ballot",
        "cast-ballot",
    );
    submit.type = "submit";
    if (poll.closed || !poll.eligible) submit.disabled = true;
    fields.appendChild(submit);

    const errorLine = document.createElement("p");
    errorLine.className = "form-error";
    errorLine.setAttribute("role", "alert");
    errorLine.hidden = true;
    form.appendChild(errorLine);

    const tallyPanel = document.createElement("p");
    tallyPanel.className = "tally-panel";
    tallyPanel.textContent = tallyLine(poll);
    container.appendChild(form);
    container.appendChild(tallyPanel);

    form.addEventListener("submit", (event) => {
        event.preventDefault();
        const content = readBallot(poll, form);
        if (!content) {
            errorLine.hidden = false;
            errorLine.textContent = "Pick an option before casting.";
            return;
        }
        void (async () => {
            try {
                await api.castBallot(poll.poll_id, content);
                const fresh = await api.getPoll(poll.poll_id);
                tallyPanel.textContent = tallyLine(fresh);
                errorLine.hidden = true;
                onTallyChange(fresh);
            } catch (error) {
                // keep the filled-in form; just say what went wrong
                errorLine.hidden = false;
                errorLine.textContent =
                    error instanceof ApiError
                        ? `${error.errorName}: ${error.message}`
                        : String(error);
            }
        })();
    });
    return form;
}
