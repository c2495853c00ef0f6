// HTTP client for the deliberation server. Components depend on the Api
// interface only, so tests can substitute an in-memory fake.

import type {
    ActivationStateView,
    AreaView,
    BallotContentView,
    CommentHeaderView,
    CommentView,
    DocumentView,
    GroupSummary,
    HomepageView,
    ItemView,
    OutcomeView,
    PollView,
    SegmentView,
} from "./types";

export class ApiError extends Error {
    constructor(
        public status: number,
        public errorName: string,
        detail: string,
    ) {
        super(detail);
    }
}

export interface Api {
    listGroups(): Promise<GroupSummary[]>;
    getHomepage(groupId: string): Promise<HomepageView>;
    joinGroup(groupId: string): Promise<{ status: string }>;
    getArea(areaId: string): Promise<AreaView>;
    getComments(
        areaId: string,
        order: "chronological" | "threaded",
    ): Promise<CommentHeaderView[]>;
    getComment(commentId: string): Promise<CommentView>;
    getItem(itemId: string): Promise<ItemView>;
    getAnnotated(
        documentId: string,
        activeAnchor: string | null,
    ): Promise<SegmentView[]>;
    getDocument(documentId: string): Promise<DocumentView>;
    getPoll(pollId: string): Promise<PollView>;
    activate(
        via: "reference" | "subject",
        commentId: string,
        prior: ActivationStateView,
    ): Promise<ActivationStateView>;
    postComment(
        areaId: string,
        subject: string,
        body: string,
        target: { kind: string; [key: string]: unknown },
    ): Promise<CommentView>;
    castBallot(pollId: string, content: BallotContentView): Promise<unknown>;
    closePoll(pollId: string): Promise<OutcomeView>;
}

export class HttpApi implements Api {
    constructor(
        private base: string = "",
        private token: string | null = null,
    ) {}

    setToken(token: string | null): void {
        this.token = token;
    }

    async login(identifier: string, secret: string): Promise<string> {
        const session = await this.request<{ token: string }>(
            "POST",
            "/sessions",
            { identifier, secret },
        );
        this.token = session.token;
        return session.token;
    }

    async register(
        displayName: string,
        email: string,
        password: string,
    ): Promise<void> {
        await this.request("POST", "/users", {
            display_name: displayName,
            email,
            password,
        });
    }

    private async request<T>(
        method: string,
        path: string,
        body?: unknown,
    ): Promise<T> {
        const headers: Record<string, string> = {};
        if (body !== undefined) headers["Content-Type"] = "application/json";
        if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
        const response = await fetch(this.base + path, {
            method,
            headers,
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const payload = await response.json().catch(() => ({}));
        if (!response.ok) {
            throw new ApiError(
                response.status,
                payload.error ?? "HttpError",
                payload.detail ?? response.statusText,
            );
        }
        return payload as T;
    }

    listGroups() {
        return this.request<GroupSummary[]>("GET", "/groups");
    }

    getHomepage(groupId: string) {
        return this.request<HomepageView>("GET", `/groups/${groupId}`);
    }

    joinGroup(groupId: string) {
        return this.request<{ status: string }>("POST", `/groups/${groupId}/join`);
    }

    getArea(areaId: string) {
        return this.request<AreaView>("GET", `/areas/${areaId}`);
    }

    getComments(areaId: string, order: "chronological" | "threaded") {
        return this.request<CommentHeaderView[]>(
            "GET",
            `/areas/${areaId}/comments?order=${order}`,
        );
    }

    getComment(commentId: string) {
        return this.request<CommentView>("GET", `/comments/${commentId}`);
    }

    getItem(itemId: string) {
        return this.request<ItemView>("GET", `/items/${itemId}`);
    }

    getAnnotated(documentId: string, activeAnchor: string | null) {
        const query = activeAnchor ? `?active_anchor=${activeAnchor}` : "";
        return this.request<SegmentView[]>(
            "GET",
            `/documents/${documentId}/annotated${query}`,
        );
    }

    getDocument(documentId: string) {
        return this.request<DocumentView>("GET", `/documents/${documentId}`);
    }

    getPoll(pollId: string) {
        return this.request<PollView>("GET", `/polls/${pollId}`);
    }

    activate(
        via: "reference" | "subject",
        commentId: string,
        prior: ActivationStateView,
    ) {
        return this.request<ActivationStateView>("POST", "/activation", {
            via,
            comment_id: commentId,
            prior,
        });
    }

    postComment(
        areaId: string,
        subject: string,
        body: string,
        target: { kind: string; [key: string]: unknown },
    ) {
        return this.request<CommentView>("POST", `/areas/${areaId}/comments`, {
            subject,
            body,
            target,
        });
    }

    castBallot(pollId: string, content: BallotContentView) {
        return this.request("POST", `/polls/${pollId}/ballots`, { content });
    }

    closePoll(pollId: string) {
        return this.request<OutcomeView>("POST", `/polls/${pollId}/close`);
    }
}
