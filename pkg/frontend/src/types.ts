/** Payload shapes of the /api/v1 review service. */

export type Verdict = "relevant" | "not_relevant" | "unsure";

export type CharSpan = [number, number];

export interface ReviewItem {
  complaint_id: string;
  narrative: string;
  highlights: { ip: CharSpan[]; abuse: CharSpan[] };
  cluster: number;
  cluster_top_terms: [string, number][];
  iteration: number;
  assigned_reviewers: string[];
  verdicts: Record<string, Verdict>;
  adjudication: Verdict | null;
}

export interface ProjectInfo {
  root: string;
  corpus_size: number;
  ref_version: number;
  ref_size: number;
  open_iteration: number | null;
  iterations: number;
  framework_categories: string[];
}

export interface LabelSubmission {
  complaint_id: string;
  reviewer_id: string;
  verdict: Verdict;
  note?: string;
  framework_tags?: string[];
}

export interface Disagreement {
  complaint_id: string;
  verdicts: Record<string, Verdict>;
}

export interface IterationSummary {
  iteration: number;
  status: "open" | "sealed";
  ref_version_in: number;
  ref_version_out: number | null;
  selected_clusters: number[];
  ref_distribution: Record<string, number>;
  n_sampled: number;
  n_confirmed: number;
  estimated_yield: Record<string, number>;
}

export interface Dashboard {
  iterations: IterationSummary[];
  ref_size_by_version: Record<string, number>;
  yield_by_iteration: Record<string, number>;
  kappa_by_round: Record<string, number | null>;
}

export interface RoundRecord {
  iteration: number;
  status: string;
  sampled: string[];
  assignments: Record<string, string[]>;
  selected_clusters: number[];
  ref_distribution: Record<string, string>;
}

export interface ExplainDoc {
  iteration: number;
  profiles: Record<string, [string, number][]>;
  attribution: {
    target_cluster: number;
    summary_topk: [string, number, number][];
    n_instances: number;
    mode: string;
  };
}
