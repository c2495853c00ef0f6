// Shapes of the server's JSON views, as returned by the HTTP API.

export interface GroupSummary {
    id: string;
    name: string;
    description: string;
    access: "open" | "closed";
    join_policy: "open_join" | "approval_required";
    member_count: number;
}

export interface AreaLink {
    id: string;
    title: string;
}

export interface HomepageView {
    group_id: string;
    name: string;
    description: string;
    viewer_is_member: boolean;
    show_join_link: boolean;
    join_policy: "open_join" | "approval_required";
    access: "open" | "closed";
    areas: AreaLink[];
    linked_areas: AreaLink[];
}

export interface AreaView {
    id: string;
    owner_group: string;
    group_name: string;
    title: string;
    description: string;
    linked_groups: string[];
    folio: string[];
    discussion: string[];
    can_post: boolean;
}

export interface ItemReferenceView {
    item_id: string;
    anchor_id: string | null;
    label: string;
}

export interface CommentHeaderView {
    comment_id: string;
    subject: string;
    author_name: string;
    created_at: string;
    item_reference: ItemReferenceView | null;
}

export interface CommentView {
    id: string;
    area: string;
    author: string;
    author_name: string;
    created_at: string;
    subject: string;
    body: string;
    retracted: boolean;
    target: { kind: string; [key: string]: unknown };
    item_reference: ItemReferenceView | null;
}

export type ItemKindView =
    | { kind: "document"; document_id: string }
    | { kind: "link"; url: string; caption: string }
    | { kind: "discussion"; prompt: string }
    | { kind: "poll" | "decision"; poll_id: string };

export interface ItemView {
    id: string;
    area: string;
    author: string;
    author_name: string;
    created_at: string;
    title: string;
    ordinal: number;
    label: string;
    retracted: boolean;
    kind: ItemKindView;
}

export interface ActivationStateView {
    active_comment: string | null;
    active_reference: string | null;
    displayed_item: string | null;
    highlighted_anchor: string | null;
}

export type SegmentView =
    | { type: "text"; text: string }
    | { type: "marker"; anchor_id: string; active: boolean; comment_id: string | null };

export interface TallyView {
    counts: Record<string, number>;
    participation: number;
    eligible_count: number;
    quorum_met: boolean;
    computed_at: string | null;
}

export interface OutcomeView {
    status: "open" | "passed" | "failed" | "winner" | "tied" | "quorum_not_met";
    winner: number | null;
    tied: number[] | null;
    closed_at: string | null;
}

export type BallotContentView =
    | { kind: "yes_no_abstain"; choice: "yes" | "no" | "abstain" }
    | { kind: "single_choice"; option: number }
    | { kind: "approval_set"; options: number[] }
    | { kind: "consent"; stance: "agree" | "stand_aside" | "block"; reason: string | null };

export interface PollView {
    poll_id: string;
    item_id: string;
    area: string;
    author: string;
    question: string;
    procedure: "majority" | "plurality" | "approval" | "consensus";
    options: string[];
    binding: boolean;
    deadline: string | null;
    quorum: number | null;
    open_ballots: boolean;
    opened_at: string;
    eligible_count: number;
    eligible: boolean;
    closed: boolean;
    outcome: OutcomeView | null;
    tally: TallyView;
    my_ballot: BallotContentView | null;
}

export interface DocumentView {
    document_id: string;
    area: string;
    item_id: string;
    revision: number;
    plaintext: boolean;
    text: string | null;
    filename: string | null;
    media_type: string | null;
    revisions: { revision: number; author: string; created_at: string }[];
    anchors: string[];
}
