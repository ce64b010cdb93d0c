/**
 * Bundled demo passages so the page is usable immediately: pick a sample,
 * keep or adjust the pre-selected mention, and search. Searching still
 * needs a reachable service — these texts only seed the query box.
 */

export interface SampleText {
  title: string;
  text: string;
  /** Word pre-selected as the query mention (first occurrence). */
  suggestedMention: string;
}

export const SAMPLE_TEXTS: readonly SampleText[] = [
  {
    title: "Coastal earthquake",
    suggestedMention: "earthquake",
    text:
      "A magnitude 6.1 earthquake struck off the northern coast early on " +
      "Tuesday, rattling windows in towns more than a hundred kilometers " +
      "away. Officials said the tremor damaged an aging viaduct and briefly " +
      "cut power to the harbor district. A smaller aftershock followed " +
      "before noon, and inspectors began checking bridges across the region.",
  },
  {
    title: "River flooding",
    suggestedMention: "flooding",
    text:
      "Days of heavy rain pushed the river over its banks on Friday, and the " +
      "flooding forced hundreds of families from low-lying neighborhoods. " +
      "Emergency crews ran boat rescues through the night while volunteers " +
      "stacked sandbags along the levee. The deluge also washed out two " +
      "county roads, cutting off the fairgrounds where evacuees had gathered.",
  },
  {
    title: "Refinery fire",
    suggestedMention: "fire",
    text:
      "A fire broke out at the refinery on the city's east side shortly " +
      "after midnight, sending flames visible from the interstate. Workers " +
      "were evacuated before the blaze reached the storage tanks, and no " +
      "injuries were reported. Investigators suspect the explosion that " +
      "preceded it began near a compressor unit under maintenance.",
  },
  {
    title: "Airline merger",
    suggestedMention: "merger",
    text:
      "The two carriers announced their merger on Monday after months of " +
      "speculation, creating the region's largest airline. Regulators said " +
      "the acquisition will face a full antitrust review before closing. " +
      "Union leaders, wary after the last consolidation in the industry, " +
      "asked for seniority protections in the combined seniority list.",
  },
];

/** Character range of the sample's suggested mention (empty if absent). */
export function mentionRange(sample: SampleText): { start: number; end: number } {
  const start = sample.text.indexOf(sample.suggestedMention);
  if (start < 0) return { start: 0, end: 0 };
  return { start, end: start + sample.suggestedMention.length };
}
