/**
 * View-model: pure mappings from service payloads to renderable structures.
 *
 * Everything here is derived strictly from the server response; the client
 * never re-computes decisions or posteriors.
 */
function cellLabel(i, j) {
    return `d${i}${j}`;
}
function cssFor(cell, recommended) {
    const classes = ["cell"];
    if (cell.excluded)
        classes.push("excluded");
    if (cell.is_current)
        classes.push("current");
    if (recommended)
        classes.push("recommended");
    if (cell.candidate_set === "E")
        classes.push("cand-escalate");
    if (cell.candidate_set === "S")
        classes.push("cand-stay");
    if (cell.candidate_set === "D")
        classes.push("cand-deescalate");
    return classes;
}
export function gridViewModel(state) {
    const rec = state.recommendation;
    const recDc = rec.dc;
    const byCoord = new Map();
    for (const cell of state.cells) {
        byCoord.set(`${cell.i},${cell.j}`, cell);
    }
    const rows = [];
    for (let i = state.grid.levels_a; i >= 1; i--) {
        const row = [];
        for (let j = 1; j <= state.grid.levels_b; j++) {
            const cell = byCoord.get(`${i},${j}`);
            if (!cell)
                throw new Error(`state payload is missing cell (${i},${j})`);
            const recommended = recDc !== null && recDc[0] === i && recDc[1] === j;
            row.push({
                i,
                j,
                label: cellLabel(i, j),
                counts: `${cell.y}/${cell.n}`,
                xi: cell.xi,
                excluded: cell.excluded,
                isCurrent: cell.is_current,
                isRecommended: recommended,
                candidate: cell.candidate_set,
                cssClasses: cssFor(cell, recommended),
            });
        }
        rows.push(row);
    }
    const stopped = state.stage === "stopped";
    let banner;
    if (stopped) {
        banner =
            state.stop_reason === "d11_toxic"
                ? "Trial stopped: the lowest combination is overly toxic"
                : "Trial stopped: maximum sample size reached";
    }
    else if (state.stage === "stage1") {
        banner = "Stage I: escalation along the run-in path";
    }
    else {
        banner = "Stage II: adaptive exploration";
    }
    let recommendationText;
    if (recDc === null) {
        recommendationText = "No further cohorts; finalize to select the MTDC";
    }
    else {
        const dec = rec.decision ? `decision ${rec.decision}, ` : "";
        recommendationText = `${dec}next cohort at ${cellLabel(recDc[0], recDc[1])}`;
    }
    return {
        rows,
        banner,
        recommendationText,
        stopped,
        version: state.version,
        enrolled: state.enrolled,
        cohortSize: state.cohort_size,
    };
}
export function whatIfRow(preview) {
    const next = preview.next;
    let outcome;
    if (next.dc === null) {
        outcome = next.stop_reason === "d11_toxic" ? "stop (lowest combination toxic)" : "stop (max N)";
    }
    else {
        outcome = cellLabel(next.dc[0], next.dc[1]);
    }
    return { dlt: preview.dlt, decision: preview.decision ?? "-", outcome };
}
export function historyRows(state) {
    return state.history.map((entry) => ({
        cohort: entry.cohort,
        dc: cellLabel(entry.dc[0], entry.dc[1]),
        dlt: entry.dlt,
        stage: entry.stage === "stage1" ? "I" : "II",
    }));
}
