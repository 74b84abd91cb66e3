/** Response shapes of the /v1 API consumed by the console. */

export interface PolicyDoc {
  kind: string;
  interval?: number;
  intervals?: Record<string, number>;
}

export interface ManifestDoc {
  version: number;
  h0: string;
  policy: PolicyDoc;
  created_ns: number;
  contract: string | null;
}

export interface FooterDoc {
  final_digest: string;
  record_count: number;
  selected_count: number;
  tx_count: number;
}

export interface VerificationSummary {
  ok: boolean;
  checked: number;
  confirmed: number;
}

export interface RecordEntry {
  id: string;
  path: string;
  status: string;
  manifest: ManifestDoc | null;
  footer: FooterDoc | null;
  verification: VerificationSummary | null;
}

export interface VerificationReport {
  ok: boolean;
  checked: number;
  confirmed: number;
  final_digest_match: boolean;
  incomplete: boolean;
  messages: string[];
  first_missing_index?: number;
}

export interface AnswerDoc {
  text: string;
  /** [chunk id, similarity score] pairs, best first. */
  sources: Array<[number, number]>;
  prompt: string;
}

export interface ProofDoc {
  block_number: number;
  message: string;
}

export interface ChatEntry {
  question: string;
  answer: AnswerDoc;
  askedAt: number;
}
