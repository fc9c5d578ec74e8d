/**
 * DOM rendering for the conduct dashboard; no state, no decision logic.
 */
function el(tag, className, text) {
    const node = document.createElement(tag);
    if (className)
        node.className = className;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
export function renderGrid(vm, container) {
    container.replaceChildren();
    const banner = el("div", vm.stopped ? "banner stopped" : "banner", vm.banner);
    container.appendChild(banner);
    const meta = el("div", "meta", `enrolled ${vm.enrolled} · version ${vm.version} · ${vm.recommendationText}`);
    container.appendChild(meta);
    const table = el("table", "grid");
    for (const row of vm.rows) {
        const tr = el("tr");
        const axis = el("th", "axis", `A${row[0].i}`);
        tr.appendChild(axis);
        for (const cell of row) {
            const td = el("td", cell.cssClasses.join(" "));
            td.appendChild(el("div", "dc-label", cell.label));
            td.appendChild(el("div", "dc-counts", cell.counts));
            td.appendChild(el("div", "dc-xi", cell.xi.toFixed(3)));
            td.title = `${cell.label}: ${cell.counts} DLT, interval probability ${cell.xi.toFixed(4)}`;
            tr.appendChild(td);
        }
        table.appendChild(tr);
    }
    const footer = el("tr");
    footer.appendChild(el("th", "axis", ""));
    for (const cell of vm.rows[vm.rows.length - 1]) {
        footer.appendChild(el("th", "axis", `B${cell.j}`));
    }
    table.appendChild(footer);
    container.appendChild(table);
}
export function renderWhatIf(rows, container) {
    container.replaceChildren();
    container.appendChild(el("h3", undefined, "What if the next cohort has..."));
    const table = el("table", "whatif");
    const head = el("tr");
    for (const caption of ["DLTs", "Decision", "Next"]) {
        head.appendChild(el("th", undefined, caption));
    }
    table.appendChild(head);
    for (const row of rows) {
        const tr = el("tr");
        tr.appendChild(el("td", undefined, String(row.dlt)));
        tr.appendChild(el("td", undefined, row.decision));
        tr.appendChild(el("td", undefined, row.outcome));
        table.appendChild(tr);
    }
    container.appendChild(table);
}
export function renderHistory(rows, container) {
    container.replaceChildren();
    container.appendChild(el("h3", undefined, "Cohort history"));
    if (!rows.length) {
        container.appendChild(el("p", "muted", "No cohorts recorded yet."));
        return;
    }
    const table = el("table", "history");
    const head = el("tr");
    for (const caption of ["Cohort", "Stage", "Combination", "DLTs"]) {
        head.appendChild(el("th", undefined, caption));
    }
    table.appendChild(head);
    for (const row of rows) {
        const tr = el("tr");
        tr.appendChild(el("td", undefined, String(row.cohort)));
        tr.appendChild(el("td", undefined, row.stage));
        tr.appendChild(el("td", undefined, row.dc));
        tr.appendChild(el("td", undefined, String(row.dlt)));
        table.appendChild(tr);
    }
    container.appendChild(table);
}
export function renderFinalReport(report, container) {
    container.replaceChildren();
    container.appendChild(el("h3", undefined, "MTDC selection"));
    const headline = report.selected
        ? `Selected MTDC: d${report.selected[0]}${report.selected[1]}`
        : "No MTDC selected";
    container.appendChild(el("p", "mtdc", headline));
    if (report.eliminated.length) {
        const list = el("ul", "eliminated");
        for (const entry of report.eliminated) {
            list.appendChild(el("li", undefined, `d${entry.dc[0]}${entry.dc[1]}: ${entry.reasons.join(", ")}`));
        }
        container.appendChild(el("p", "muted", "Eliminated combinations:"));
        container.appendChild(list);
    }
    if (report.overrides.length) {
        container.appendChild(el("p", "muted", `Off-recommendation cohorts at versions: ${report.overrides.join(", ")}`));
    }
}
