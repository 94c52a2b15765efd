/**
 * A deliberately small markdown renderer for data cards.
 *
 * Cards are trusted-ish (they come from the local registry) but are
 * still escaped before any markup is applied.  Supported: headings to
 * level 4, unordered lists, fenced code blocks, inline code, bold,
 * italics, links, paragraphs.  Anything else stays literal text.
 */

export function stripFrontMatter(text: string): string {
  if (!text.startsWith("---")) return text;
  const end = text.indexOf("\n---", 3);
  if (end === -1) return text;
  return text.slice(end + 4).replace(/^\r?\n/, "");
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function inline(s: string): string {
  return escapeHtml(s)
    .replace(/`([^`]+)`/g, "<code>$1</code>")
    .replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>")
    .replace(/\*([^*]+)\*/g, "<em>$1</em>")
    .replace(
      /\[([^\]]+)\]\(([^)\s]+)\)/g,
      '<a href="$2" rel="noopener">$1</a>',
    );
}

export function renderMarkdown(text: string): string {
  const lines = stripFrontMatter(text).split(/\r?\n/);
  const out: string[] = [];
  let paragraph: string[] = [];
  let listOpen = false;
  let codeOpen = false;

  const flushParagraph = () => {
    if (paragraph.length) {
      out.push(`<p>${inline(paragraph.join(" "))}</p>`);
      paragraph = [];
    }
  };
  const closeList = () => {
    if (listOpen) {
      out.push("</ul>");
      listOpen = false;
    }
  };

  for (const line of lines) {
    if (codeOpen) {
      if (line.startsWith("```")) {
        out.push("</code></pre>");
        codeOpen = false;
      } else {
        out.push(escapeHtml(line));
      }
      continue;
    }
    if (line.startsWith("```")) {
      flushParagraph();
      closeList();
      out.push("<pre><code>");
      codeOpen = true;
      continue;
    }
    const heading = /^(#{1,4})\s+(.*)$/.exec(line);
    if (heading) {
      flushParagraph();
      closeList();
      const level = heading[1].length;
      out.push(`<h${level}>${inline(heading[2])}</h${level}>`);
      continue;
    }
    const item = /^\s*[-*]\s+(.*)$/.exec(line);
    if (item) {
      flushParagraph();
      if (!listOpen) {
        out.push("<ul>");
        listOpen = true;
      }
      out.push(`<li>${inline(item[1])}</li>`);
      continue;
    }
    if (line.trim() === "") {
      flushParagraph();
      closeList();
      continue;
    }
    paragraph.push(line.trim());
  }
  if (codeOpen) out.push("</code></pre>");
  flushParagraph();
  closeList();
  return out.join("\n");
}
