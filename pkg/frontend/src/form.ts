/** Scope form: options come solely from GET /api/collections; the generate
 * button enables only when every field has a selection. */

import { CollectionOptions, ScopeSelection } from './api.js';

export interface FormElements {
  years: HTMLSelectElement;
  season: HTMLSelectElement;
  brands: HTMLSelectElement;
  group: HTMLSelectElement;
  generate: HTMLButtonElement;
}

export function findFormElements(root: ParentNode): FormElements {
  const pick = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector(`#${id}`);
    if (!el) throw new Error(`missing form element #${id}`);
    return el as T;
  };
  return {
    years: pick<HTMLSelectElement>('scope-years'),
    season: pick<HTMLSelectElement>('scope-season'),
    brands: pick<HTMLSelectElement>('scope-brands'),
    group: pick<HTMLSelectElement>('scope-group'),
    generate: pick<HTMLButtonElement>('generate'),
  };
}

function fill(select: HTMLSelectElement, values: (string | number)[]): void {
  select.innerHTML = '';
  for (const value of values) {
    const option = document.createElement('option');
    option.value = String(value);
    option.textContent = String(value);
    select.appendChild(option);
  }
}

export function renderOptions(elements: FormElements, options: CollectionOptions): void {
  fill(elements.years, options.years);
  fill(elements.season, options.seasons);
  fill(elements.brands, options.brands);
  fill(elements.group, options.groups);
  // sensible defaults: everything that is a single choice pre-selected
  if (options.seasons.length > 0) elements.season.selectedIndex = 0;
  if (options.groups.length > 0) elements.group.selectedIndex = 0;
}

export function catalogIsEmpty(options: CollectionOptions): boolean {
  return options.years.length === 0 || options.brands.length === 0;
}

function selectedValues(select: HTMLSelectElement): string[] {
  // iterate options rather than selectedOptions: the latter is a live
  // collection some DOM implementations cache too aggressively
  return Array.from(select.options)
    .filter((option) => option.selected)
    .map((option) => option.value);
}

/** Current selection, or null while any field is empty. */
export function readSelection(elements: FormElements): ScopeSelection | null {
  const years = selectedValues(elements.years).map(Number);
  const season = elements.season.value;
  const brands = selectedValues(elements.brands);
  const group = elements.group.value;
  if (years.length === 0 || !season || brands.length === 0 || !group) {
    return null;
  }
  return { years, season, brands, group };
}

export function syncGenerateEnabled(elements: FormElements, busy: boolean): void {
  elements.generate.disabled = busy || readSelection(elements) === null;
}

export function setFormDisabled(elements: FormElements, disabled: boolean): void {
  elements.years.disabled = disabled;
  elements.season.disabled = disabled;
  elements.brands.disabled = disabled;
  elements.group.disabled = disabled;
  if (disabled) elements.generate.disabled = true;
}
