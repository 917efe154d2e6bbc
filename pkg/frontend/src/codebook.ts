// Codebook text shown in the annotation sidebar. Keep these definitions in
// step with whatever guidelines the annotation team is actually using.

export interface CodebookEntry {
  label: "story" | "event";
  title: string;
  definition: string;
  include: string[];
  exclude: string[];
}

export const CODEBOOK: CodebookEntry[] = [
  {
    label: "story",
    title: "Story span",
    definition:
      "A stretch of text where the writer recounts connected things that " +
      "actually happened, in some order, to themselves or to people they " +
      "know about. The telling has a thread: one thing leads to or follows " +
      "another.",
    include: [
      "First-person accounts of something that happened, however mundane",
      "Retellings of what happened to someone else, if concrete and sequenced",
      "Background narration inside advice posts (\"this happened to me, so...\")",
    ],
    exclude: [
      "Pure opinion, advice, or questions with no recounted happenings",
      "Hypotheticals and plans (\"if I were to...\", \"tomorrow I will...\")",
      "Generic habits with no specific occasion (\"I usually walk the dog\")",
    ],
  },
  {
    label: "event",
    title: "Event span",
    definition:
      "A minimal mention of one concrete thing that happened: it names an " +
      "occurrence that took place at some particular time, stated as fact " +
      "rather than wished, denied, or imagined.",
    include: [
      "Single verbs or verb phrases reporting an occurrence (\"the pipe burst\")",
      "Occurrences inside a story span — mark both; the labels are independent",
      "Events reported by others, as long as the text treats them as having happened",
    ],
    exclude: [
      "Negated or hypothetical occurrences (\"it never arrived\", \"would crash\")",
      "States and descriptions (\"the house is old\")",
      "Future or habitual readings",
    ],
  },
];

export const SHORTCUTS: { key: string; action: string }[] = [
  { key: "s", action: "switch to story mode" },
  { key: "e", action: "switch to event mode" },
  { key: "enter", action: "submit this document" },
  { key: "u", action: "undo the last span" },
];
